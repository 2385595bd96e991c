//! Trotterized probabilistic circuit.
//!
//! Each of the `N` steps repeats one fixed pattern: for every layer, one
//! horizontal slot per term of the layer followed by one noise slot per qubit.
//! A slot either does nothing or "fires" its channel. Horizontal slots fire
//! with probability `g t / N` and then apply `Id + L/g`; noise slots fire with
//! probability `kappa t / (N L)` and then apply the entanglement-breaking
//! channel. Circuits with over a million steps are common, so slots are
//! enumerated lazily from the pattern instead of being stored.

use serde::Serialize;

use crate::channel::{
    convex_split, cp_threshold, first_order_split, interaction_strength, Superoperator,
};
use crate::error::{Result, SimError};
use crate::lattice::{partition_layers, LayerPartition, ModelSpec};
use crate::linalg::{self, CMat};

/// Default multiplier applied to the interaction strength to pick `g`.
pub const DEFAULT_G_FACTOR: f64 = 1.001;
/// Default block constant `c` in `exp(-kappa tau) = c`.
pub const DEFAULT_TAU_C: f64 = 0.3;
/// Largest register handled by the full-system averaged maps.
pub const MAX_AVERAGE_QUBITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotKind {
    Horizontal { term: usize },
    Noise { site: usize },
}

/// One slot of the per-step pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatternSlot {
    pub kind: SlotKind,
    pub layer: usize,
    pub p_fire: f64,
}

/// A slot of the full circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSlot {
    pub kind: SlotKind,
    pub step: usize,
    pub layer: usize,
    pub p_fire: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrotterOptions {
    /// `g = g_factor * interaction_strength` unless `g` is given.
    pub g_factor: f64,
    pub g: Option<f64>,
    /// Accept terms whose fired map `Id + L/g` is not completely positive.
    /// Such maps are only Hermiticity and trace preserving; every coherent
    /// (Hamiltonian) term falls in this class.
    pub allow_non_cp: bool,
    pub tau_c: f64,
}

impl Default for TrotterOptions {
    fn default() -> Self {
        Self { g_factor: DEFAULT_G_FACTOR, g: None, allow_non_cp: false, tau_c: DEFAULT_TAU_C }
    }
}

impl TrotterOptions {
    pub fn resolve_g(&self, model: &ModelSpec) -> Result<f64> {
        if let Some(g) = self.g {
            if !(g > 0.0) || !g.is_finite() {
                return Err(SimError::Config(format!("g must be positive, got {g}")));
            }
            return Ok(g);
        }
        if model.terms.is_empty() {
            return Ok(0.0);
        }
        if !(self.g_factor >= 1.0) {
            return Err(SimError::Config(format!("g factor {} below 1", self.g_factor)));
        }
        Ok(self.g_factor * interaction_strength(&model.terms)?)
    }
}

/// Block duration `tau` solving `exp(-kappa tau) = c`; infinite without noise.
pub fn block_tau(kappa: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(SimError::Config(format!("block constant c = {c} must lie in (0, 1)")));
    }
    Ok(if kappa > 0.0 { -c.ln() / kappa } else { f64::INFINITY })
}

/// Number of time blocks `Q` for `n_steps` steps: the divisor of `n_steps`
/// closest to `t / tau` (larger one on ties).
pub fn block_count(n_steps: usize, t: f64, tau: f64) -> usize {
    let target = if t > 0.0 && tau.is_finite() { t / tau } else { 0.0 };
    let mut best = 1;
    let mut best_gap = f64::INFINITY;
    let mut d = 1;
    while d * d <= n_steps {
        if n_steps.is_multiple_of(d) {
            for q in [d, n_steps / d] {
                let gap = (q as f64 - target).abs();
                if gap < best_gap || (gap == best_gap && q > best) {
                    best = q;
                    best_gap = gap;
                }
            }
        }
        d += 1;
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrotterCircuit {
    model: ModelSpec,
    n_steps: usize,
    g: f64,
    layers: LayerPartition,
    pattern: Vec<PatternSlot>,
    fired_maps: Vec<Superoperator>,
    noise_map: Superoperator,
    sites: Vec<usize>,
    non_cp_terms: usize,
    blocks: usize,
    tau_block: f64,
}

/// Summary emitted in run metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitDigest {
    pub steps: usize,
    pub g: f64,
    pub layers: usize,
    pub slots_per_step: usize,
    pub total_slots: u64,
    pub horizontal_slots: u64,
    pub noise_slots: u64,
    pub p_horizontal: f64,
    pub p_noise: f64,
    pub blocks: usize,
    pub block_size: usize,
    pub tau_block: f64,
    pub non_cp_terms: usize,
}

pub fn build_trotter_circuit(model: &ModelSpec, n_steps: usize) -> Result<TrotterCircuit> {
    build_trotter_circuit_with(model, n_steps, &TrotterOptions::default())
}

pub fn build_trotter_circuit_with(
    model: &ModelSpec,
    n_steps: usize,
    opts: &TrotterOptions,
) -> Result<TrotterCircuit> {
    model.validate()?;
    if n_steps == 0 {
        return Err(SimError::Infeasible("at least one Trotter step is required".into()));
    }
    let g = opts.resolve_g(model)?;
    let layers = partition_layers(&model.terms)?;
    let n_layers = layers.len().max(1);
    let dt = model.t / n_steps as f64;
    let p_h = g * dt;
    let p_n = model.kappa * dt / n_layers as f64;
    if p_h > 1.0 {
        return Err(SimError::ProbabilityOverflow { what: "horizontal slots".into(), p: p_h });
    }
    if p_n > 1.0 {
        return Err(SimError::ProbabilityOverflow { what: "noise slots".into(), p: p_n });
    }

    let mut fired_maps = Vec::with_capacity(model.terms.len());
    let mut non_cp_terms = 0;
    for term in &model.terms {
        let split = if opts.allow_non_cp {
            first_order_split(term, g, 0.0)?
        } else {
            convex_split(term, g, 0.0)?
        };
        if cp_threshold(term).is_none_or(|th| th > g * (1.0 + 1e-12)) {
            non_cp_terms += 1;
        }
        fired_maps.push(split.channel);
    }

    let n = model.n();
    let mut pattern = Vec::new();
    for layer in 0..n_layers {
        if let Some(terms) = layers.layers.get(layer) {
            for &term in terms {
                pattern.push(PatternSlot { kind: SlotKind::Horizontal { term }, layer, p_fire: p_h });
            }
        }
        for site in 0..n {
            pattern.push(PatternSlot { kind: SlotKind::Noise { site }, layer, p_fire: p_n });
        }
    }

    let tau = block_tau(model.kappa, opts.tau_c)?;
    let blocks = if model.t > 0.0 { block_count(n_steps, model.t, tau) } else { 1 };
    let tau_block = model.t / blocks as f64;

    Ok(TrotterCircuit {
        model: model.clone(),
        n_steps,
        g,
        layers,
        pattern,
        fired_maps,
        noise_map: model.noise.superoperator(),
        sites: (0..n).collect(),
        non_cp_terms,
        blocks,
        tau_block,
    })
}

impl TrotterCircuit {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn layers(&self) -> &LayerPartition {
        &self.layers
    }

    /// Layer count used for the noise probability (at least one).
    pub fn n_layers(&self) -> usize {
        self.layers.len().max(1)
    }

    pub fn pattern(&self) -> &[PatternSlot] {
        &self.pattern
    }

    pub fn slots_per_step(&self) -> usize {
        self.pattern.len()
    }

    pub fn slot_count(&self) -> u64 {
        self.n_steps as u64 * self.pattern.len() as u64
    }

    pub fn slot(&self, index: u64) -> ChannelSlot {
        let s = self.pattern.len() as u64;
        let p = self.pattern[(index % s) as usize];
        ChannelSlot { kind: p.kind, step: (index / s) as usize, layer: p.layer, p_fire: p.p_fire }
    }

    /// All slots in time order.
    pub fn slots(&self) -> impl Iterator<Item = ChannelSlot> + '_ {
        (0..self.slot_count()).map(move |i| self.slot(i))
    }

    /// Fired map of horizontal term `term`.
    pub fn fired_map(&self, term: usize) -> &Superoperator {
        &self.fired_maps[term]
    }

    pub fn noise_map(&self) -> &Superoperator {
        &self.noise_map
    }

    /// Qubits acted on by a slot and the map applied when it fires.
    pub fn slot_action(&self, kind: SlotKind) -> (&[usize], &Superoperator) {
        match kind {
            SlotKind::Horizontal { term } => (&self.model.terms[term].support, &self.fired_maps[term]),
            SlotKind::Noise { site } => (&self.sites[site..site + 1], &self.noise_map),
        }
    }

    pub fn non_cp_terms(&self) -> usize {
        self.non_cp_terms
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Duration of one percolation time block.
    pub fn tau_block(&self) -> f64 {
        self.tau_block
    }

    pub fn digest(&self) -> CircuitDigest {
        let horizontal = self
            .pattern
            .iter()
            .filter(|p| matches!(p.kind, SlotKind::Horizontal { .. }))
            .count() as u64;
        let per_step = self.pattern.len() as u64;
        let steps = self.n_steps as u64;
        let dt = self.model.t / self.n_steps as f64;
        CircuitDigest {
            steps: self.n_steps,
            g: self.g,
            layers: self.layers.len(),
            slots_per_step: self.pattern.len(),
            total_slots: steps * per_step,
            horizontal_slots: steps * horizontal,
            noise_slots: steps * (per_step - horizontal),
            p_horizontal: self.g * dt,
            p_noise: self.model.kappa * dt / self.n_layers() as f64,
            blocks: self.blocks,
            block_size: self.n_steps / self.blocks,
            tau_block: self.tau_block,
            non_cp_terms: self.non_cp_terms,
        }
    }
}

/// Unrounded step count `t^2 (sum_terms 2g + 2 n kappa)^2 / eps`.
pub fn raw_step_count(model: &ModelSpec, g: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SimError::Config(format!("target error {eps} must lie in (0, 1)")));
    }
    let norm = 2.0 * g * model.terms.len() as f64 + 2.0 * model.n() as f64 * model.kappa;
    Ok(model.t * model.t * norm * norm / eps)
}

/// Step count for a target Trotter error, padded so the time blocks divide it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepPlan {
    pub raw: f64,
    pub steps: usize,
    pub blocks: usize,
    pub block_size: usize,
}

pub fn choose_n(model: &ModelSpec, eps: f64) -> Result<usize> {
    Ok(plan_steps(model, eps, &TrotterOptions::default())?.steps)
}

pub fn plan_steps(model: &ModelSpec, eps: f64, opts: &TrotterOptions) -> Result<StepPlan> {
    let g = opts.resolve_g(model)?;
    let raw = raw_step_count(model, g, eps)?;
    if model.t == 0.0 {
        return Ok(StepPlan { raw, steps: 1, blocks: 1, block_size: 1 });
    }
    let n_layers = partition_layers(&model.terms)?.len().max(1) as f64;
    // Keep both firing probabilities at most one.
    let floor = (g * model.t).max(model.kappa * model.t / n_layers).ceil();
    let base = raw.ceil().max(floor).max(1.0);
    if base > 1e15 {
        return Err(SimError::SizeGuard(format!("step count {base:.3e} is too large")));
    }
    let tau = block_tau(model.kappa, opts.tau_c)?;
    let blocks = if tau.is_finite() { (model.t / tau).round().max(1.0) as usize } else { 1 };
    let block_size = (base as usize).div_ceil(blocks);
    Ok(StepPlan { raw, steps: block_size * blocks, blocks, block_size })
}

/// Mixture `(1 - p) Id + p E` of a slot, on its support.
fn slot_mixture(circuit: &TrotterCircuit, slot: &PatternSlot) -> Result<CMat> {
    let (support, map) = circuit.slot_action(slot.kind);
    let id = Superoperator::identity(support.len());
    Ok(id.combine(1.0 - slot.p_fire, map, slot.p_fire)?.matrix().clone())
}

fn guard_size(n: usize) -> Result<()> {
    if n > MAX_AVERAGE_QUBITS {
        return Err(SimError::SizeGuard(format!(
            "averaged circuit needs n <= {MAX_AVERAGE_QUBITS}, got {n}"
        )));
    }
    Ok(())
}

/// Applies a local superoperator to every column of a full superoperator.
fn left_apply(full: &mut CMat, n: usize, positions: &[usize], local: &CMat) -> Result<()> {
    let d = 1usize << n;
    let mut col = CMat::zeros(d, d);
    for j in 0..full.ncols() {
        col.as_mut_slice().copy_from_slice(full.column(j).as_slice());
        linalg::apply_local_superop(&mut col, n, positions, local)?;
        full.column_mut(j).copy_from_slice(col.as_slice());
    }
    Ok(())
}

/// Full-register superoperator of the averaged circuit: every slot replaced by
/// its mixture, composed in slot order. One step is built explicitly and then
/// raised to the `N`-th power.
pub fn average_trotter_channel(circuit: &TrotterCircuit) -> Result<Superoperator> {
    let n = circuit.n();
    guard_size(n)?;
    let d2 = 1usize << (2 * n);
    let mut step = CMat::identity(d2, d2);
    for slot in circuit.pattern() {
        let (support, _) = circuit.slot_action(slot.kind);
        left_apply(&mut step, n, support, &slot_mixture(circuit, slot)?)?;
    }
    let mut result = CMat::identity(d2, d2);
    let mut base = step;
    let mut e = circuit.n_steps();
    while e > 0 {
        if e & 1 == 1 {
            result = &base * &result;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    Superoperator::new(n, result)
}

/// Averaged Trotter state, applying the slot mixtures directly to the input.
pub fn average_trotter_state(circuit: &TrotterCircuit) -> Result<CMat> {
    let n = circuit.n();
    guard_size(n)?;
    let mixtures = circuit
        .pattern()
        .iter()
        .map(|slot| slot_mixture(circuit, slot))
        .collect::<Result<Vec<_>>>()?;
    let mut rho = initial_state(circuit.model());
    for _ in 0..circuit.n_steps() {
        for (slot, mix) in circuit.pattern().iter().zip(&mixtures) {
            let (support, _) = circuit.slot_action(slot.kind);
            linalg::apply_local_superop(&mut rho, n, support, mix)?;
        }
    }
    Ok(rho)
}

/// Product input state, site 0 as the most significant factor.
pub fn initial_state(model: &ModelSpec) -> CMat {
    linalg::kron_all(model.initial.iter().map(|s| s.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{is_cptp, DenseOperator, EntanglementBreakingChannel, LindbladTerm};
    use crate::lattice::Lattice;

    fn dephasing_model(n: usize, kappa: f64, t: f64) -> ModelSpec {
        let lattice = Lattice::chain(n);
        let terms = (0..n)
            .map(|s| LindbladTerm::new(vec![s], None, vec![DenseOperator::pauli_z()]).unwrap())
            .collect();
        ModelSpec {
            lattice,
            terms,
            kappa,
            noise: EntanglementBreakingChannel::z_measure(),
            initial: vec![DenseOperator::plus(); n],
            t,
            interaction_range: None,
        }
    }

    fn exchange_pair(kappa: f64) -> ModelSpec {
        ModelSpec {
            lattice: Lattice::chain(2),
            terms: vec![LindbladTerm::new(vec![0, 1], None, vec![DenseOperator::swap()]).unwrap()],
            kappa,
            noise: EntanglementBreakingChannel::z_measure(),
            initial: vec![DenseOperator::ket0(), DenseOperator::ket1()],
            t: 1.0,
            interaction_range: None,
        }
    }

    #[test]
    fn slot_counts_and_order() {
        let mut m = exchange_pair(1.0);
        m.t = 0.25;
        let c = build_trotter_circuit(&m, 3).unwrap();
        assert_eq!(c.slot_count(), 9);
        let kinds: Vec<SlotKind> = c.slots().map(|s| s.kind).collect();
        assert_eq!(kinds[0], SlotKind::Horizontal { term: 0 });
        assert_eq!(kinds[1], SlotKind::Noise { site: 0 });
        assert_eq!(kinds[2], SlotKind::Noise { site: 1 });
        assert_eq!(c.slot(7).step, 2);
    }

    #[test]
    fn zero_noise_gives_zero_noise_probability() {
        let c = build_trotter_circuit(&exchange_pair(0.0), 5).unwrap();
        assert!(c.slots().filter(|s| matches!(s.kind, SlotKind::Noise { .. })).all(|s| s.p_fire == 0.0));
    }

    #[test]
    fn horizontal_probability_is_g_t_over_n() {
        let mut m = dephasing_model(1, 0.0, 1.0);
        m.terms.truncate(1);
        let opts = TrotterOptions { g: Some(2.0), ..Default::default() };
        let c = build_trotter_circuit_with(&m, 100, &opts).unwrap();
        assert!((c.pattern()[0].p_fire - 0.02).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_reported() {
        let m = exchange_pair(50.0);
        assert!(matches!(build_trotter_circuit(&m, 10), Err(SimError::ProbabilityOverflow { .. })));
    }

    #[test]
    fn coherent_terms_need_the_non_cp_mode() {
        let mut m = exchange_pair(1.0);
        m.terms = vec![LindbladTerm::new(vec![0, 1], Some(DenseOperator::swap()), vec![]).unwrap()];
        assert!(matches!(build_trotter_circuit(&m, 10), Err(SimError::NotCompletelyPositive { .. })));
        let opts = TrotterOptions { allow_non_cp: true, ..Default::default() };
        let c = build_trotter_circuit_with(&m, 10, &opts).unwrap();
        assert_eq!(c.non_cp_terms(), 1);
    }

    #[test]
    fn choose_n_scales_and_aligns() {
        let m = dephasing_model(3, 4.0, 1.0);
        let opts = TrotterOptions::default();
        let g = opts.resolve_g(&m).unwrap();
        let a = raw_step_count(&m, g, 0.1).unwrap();
        let b = raw_step_count(&m, g, 0.05).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        let plan = plan_steps(&m, 0.05, &opts).unwrap();
        assert_eq!(plan.steps % plan.blocks, 0);
        assert!(plan.steps as f64 >= plan.raw);
        let c = build_trotter_circuit(&m, plan.steps).unwrap();
        assert_eq!(c.blocks(), plan.blocks);
        let mut still = m.clone();
        still.t = 0.0;
        assert_eq!(choose_n(&still, 0.05).unwrap(), 1);
    }

    #[test]
    fn block_count_picks_nearest_divisor() {
        assert_eq!(block_count(12, 1.0, 0.2), 6);
        assert_eq!(block_count(12, 1.0, 0.3), 3);
        assert_eq!(block_count(7, 1.0, 0.2), 7);
        assert_eq!(block_count(10, 1.0, f64::INFINITY), 1);
    }

    #[test]
    fn averaged_channel_identity_and_measurement() {
        let m = exchange_pair(0.0);
        let mut m0 = m.clone();
        m0.t = 0.0;
        let c = build_trotter_circuit(&m0, 4).unwrap();
        assert_eq!(average_trotter_channel(&c).unwrap(), Superoperator::identity(2));

        let single = ModelSpec {
            lattice: Lattice::chain(1),
            terms: vec![],
            kappa: 1.0,
            noise: EntanglementBreakingChannel::z_measure(),
            initial: vec![DenseOperator::plus()],
            t: 1.0,
            interaction_range: None,
        };
        let c = build_trotter_circuit(&single, 1).unwrap();
        assert_eq!(c.pattern()[0].p_fire, 1.0);
        let rho = average_trotter_state(&c).unwrap();
        assert!(linalg::max_abs(&(rho - DenseOperator::maximally_mixed(1).into_matrix())) < 1e-15);
    }

    #[test]
    fn averaged_channel_is_cptp_and_matches_state_path() {
        let m = exchange_pair(2.0);
        let c = build_trotter_circuit(&m, 16).unwrap();
        let ch = average_trotter_channel(&c).unwrap();
        assert!(is_cptp(&ch, 1e-9));
        let via_channel = ch.apply(&DenseOperator::new(initial_state(&m)).unwrap()).unwrap();
        let direct = average_trotter_state(&c).unwrap();
        assert!(linalg::max_abs(&(via_channel.matrix() - direct)) < 1e-12);
    }
}
