//! Brute-force reference computations on the full register (small `n` only).

use serde::Serialize;

use crate::channel::Superoperator;
use crate::error::{Result, SimError};
use crate::lattice::ModelSpec;
use crate::linalg::{self, CMat};
use crate::percolation::{build_percolation_config, max_closed_cluster, sample_assignment, ChannelAssignment};
use crate::rng::{domain, substream};
use crate::sampler::cluster_bound;
use crate::trotter::{initial_state, SlotKind, TrotterCircuit};

/// Largest register for exponential evolution.
pub const MAX_EXACT_QUBITS: usize = 6;
/// Largest register for which the dense generator is assembled.
pub const MAX_DENSE_GENERATOR_QUBITS: usize = 4;
/// Distribution entries below `-NEGATIVE_TOL` are errors rather than round-off.
pub const NEGATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub n: usize,
    pub rho: CMat,
}

impl FullState {
    pub fn validate(&self, tol: f64) -> Result<()> {
        let dim = 1usize << self.n;
        if self.rho.shape() != (dim, dim) {
            return Err(SimError::DimensionMismatch(format!("{}-qubit state of shape {:?}", self.n, self.rho.shape())));
        }
        if !linalg::is_hermitian(&self.rho, tol) {
            return Err(SimError::Numerical("state is not Hermitian".into()));
        }
        let tr = linalg::trace(&self.rho);
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(SimError::Numerical(format!("state trace {tr}")));
        }
        let min = linalg::hermitian_eigenvalues(&self.rho)[0];
        if min < -tol {
            return Err(SimError::Numerical(format!("state has eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

fn guard(n: usize, cap: usize, what: &str) -> Result<()> {
    if n > cap {
        return Err(SimError::SizeGuard(format!("{what} supports at most {cap} qubits, got {n}")));
    }
    Ok(())
}

/// Local pieces of the full generator: each term, then `kappa (N - Id)` per site.
fn local_generators(model: &ModelSpec) -> Result<Vec<(Vec<usize>, CMat)>> {
    let mut parts: Vec<(Vec<usize>, CMat)> =
        model.terms.iter().map(|t| (t.support.clone(), t.generator().matrix().clone())).collect();
    if model.kappa > 0.0 {
        let noise = Superoperator::identity(1).combine(-model.kappa, &model.noise.superoperator(), model.kappa)?;
        for site in 0..model.n() {
            parts.push((vec![site], noise.matrix().clone()));
        }
    }
    Ok(parts)
}

/// `rho(t) = exp(t G) rho(0)` for the full generator
/// `G = sum_terms L + kappa sum_i (N_i - Id)`, evaluated as the action of the
/// exponential through local applications of each piece.
pub fn evolve_exact(model: &ModelSpec) -> Result<FullState> {
    model.validate()?;
    let n = model.n();
    guard(n, MAX_EXACT_QUBITS, "exact evolution")?;
    let parts = local_generators(model)?;
    let bound: f64 = parts.iter().map(|(_, g)| linalg::norm1(g)).sum();
    let apply = |x: &CMat| -> Result<CMat> {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for (support, g) in &parts {
            let mut y = x.clone();
            linalg::apply_local_superop(&mut y, n, support, g)?;
            out += y;
        }
        Ok(out)
    };
    let rho = linalg::expm_action(apply, &initial_state(model), model.t, bound)?;
    Ok(FullState { n, rho })
}

/// Dense full-register generator (column-stacking convention).
pub fn full_generator(model: &ModelSpec) -> Result<Superoperator> {
    let n = model.n();
    guard(n, MAX_DENSE_GENERATOR_QUBITS, "the dense generator")?;
    let d = 1usize << n;
    let mut total = CMat::zeros(d * d, d * d);
    for (support, g) in local_generators(model)? {
        let mut embedded = CMat::identity(d * d, d * d);
        let mut col = CMat::zeros(d, d);
        for j in 0..d * d {
            col.as_mut_slice().copy_from_slice(embedded.column(j).as_slice());
            linalg::apply_local_superop(&mut col, n, &support, &g)?;
            embedded.column_mut(j).copy_from_slice(col.as_slice());
        }
        total += embedded;
    }
    Superoperator::new(n, total)
}

/// `exp(t G) rho(0)` with the dense generator; a second path for cross-checks.
pub fn evolve_exact_dense(model: &ModelSpec) -> Result<FullState> {
    model.validate()?;
    let gen = full_generator(model)?;
    let prop = Superoperator::new(model.n(), linalg::expm(&gen.matrix().scale(model.t))?)?;
    let rho = prop.apply(&crate::channel::DenseOperator::new(initial_state(model))?)?;
    Ok(FullState { n: model.n(), rho: rho.into_matrix() })
}

/// Computational-basis distribution from a diagonal, site 0 as the most
/// significant bit. Small negative entries clip to zero.
pub fn distribution_from_diagonal(diag: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = diag.iter().find(|&&p| p < -NEGATIVE_TOL || !p.is_finite()) {
        return Err(SimError::Numerical(format!("basis probability {bad:.3e} is negative")));
    }
    let clipped: Vec<f64> = diag.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::Numerical("basis distribution has no mass".into()));
    }
    Ok(clipped.into_iter().map(|p| p / total).collect())
}

pub fn basis_distribution(state: &FullState) -> Result<Vec<f64>> {
    let diag: Vec<f64> = (0..state.rho.nrows()).map(|i| state.rho[(i, i)].re).collect();
    distribution_from_diagonal(&diag)
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(SimError::DimensionMismatch(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Trace distance `||a - b||_1` (sum of singular values).
pub fn trace_norm_distance(a: &CMat, b: &CMat) -> f64 {
    linalg::trace_norm(&(a - b))
}

/// Applies every fired slot of an assignment to the full state, with the
/// entanglement-breaking channel in its mixture form. Repeated firings of an
/// idempotent noise channel on an untouched qubit are skipped.
pub fn apply_assignment(circuit: &TrotterCircuit, assignment: &ChannelAssignment, rho: &mut CMat) -> Result<()> {
    let n = circuit.n();
    let noise = circuit.noise_map().matrix();
    let idempotent = linalg::max_abs(&(noise * noise - noise)) < 1e-14;
    let mut refreshed = vec![false; n];
    let per_step = circuit.slots_per_step() as u64;
    for &idx in assignment.fired() {
        let kind = circuit.pattern()[(idx % per_step) as usize].kind;
        let (support, map) = circuit.slot_action(kind);
        match kind {
            SlotKind::Noise { site } => {
                if idempotent && refreshed[site] {
                    continue;
                }
                refreshed[site] = true;
            }
            SlotKind::Horizontal { .. } => support.iter().for_each(|&s| refreshed[s] = false),
        }
        linalg::apply_local_superop(rho, n, support, map.matrix())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    /// Enumerate all assignments when at most this many slots are random.
    pub max_exhaustive_slots: u32,
    pub mc_assignments: u64,
    pub seed: u64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { max_exhaustive_slots: 22, mc_assignments: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedReference {
    pub distribution: Vec<f64>,
    /// Probability mass (or fraction of draws) of accepted assignments.
    pub acceptance: f64,
    pub method: ReferenceMethod,
    pub assignments: u64,
    /// Accepted assignments whose output diagonal had an entry below
    /// `-NEGATIVE_TOL` (possible only with non-CP horizontal maps).
    pub non_positive_outputs: u64,
}

struct Accumulator {
    sum: Vec<f64>,
    mass: f64,
    total: f64,
    non_positive: u64,
}

impl Accumulator {
    fn add(&mut self, circuit: &TrotterCircuit, a: &ChannelAssignment, weight: f64, c_prime: f64) -> Result<()> {
        self.total += weight;
        let cfg = build_percolation_config(circuit, a, circuit.tau_block())?;
        if max_closed_cluster(&cfg.grid, &cfg.open) as f64 > cluster_bound(c_prime, circuit.n()) {
            return Ok(());
        }
        let mut rho = initial_state(circuit.model());
        apply_assignment(circuit, a, &mut rho)?;
        let mut negative = false;
        for (i, s) in self.sum.iter_mut().enumerate() {
            let p = rho[(i, i)].re;
            negative |= p < -NEGATIVE_TOL;
            *s += weight * p;
        }
        self.non_positive += u64::from(negative);
        self.mass += weight;
        Ok(())
    }
}

/// Output distribution of the Trotter circuit conditioned on the percolation
/// acceptance rule. Exact enumeration when few slots are random, otherwise an
/// average over `mc_assignments` sampled assignments.
pub fn conditioned_trotter_distribution(
    circuit: &TrotterCircuit,
    c_prime: f64,
    opts: &ReferenceOptions,
) -> Result<ConditionedReference> {
    let n = circuit.n();
    guard(n, MAX_EXACT_QUBITS, "the conditioned reference")?;
    let mut acc = Accumulator { sum: vec![0.0; 1 << n], mass: 0.0, total: 0.0, non_positive: 0 };
    let per_step = circuit.slots_per_step() as u64;
    let random_positions: Vec<usize> = circuit
        .pattern()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.p_fire > 0.0 && p.p_fire < 1.0)
        .map(|(j, _)| j)
        .collect();
    let random_slots = random_positions.len() as u64 * circuit.n_steps() as u64;

    let (method, assignments) = if random_slots <= opts.max_exhaustive_slots as u64 {
        let mut certain = Vec::new();
        let mut random = Vec::new();
        for step in 0..circuit.n_steps() as u64 {
            for (j, p) in circuit.pattern().iter().enumerate() {
                let idx = step * per_step + j as u64;
                if p.p_fire >= 1.0 {
                    certain.push(idx);
                } else if p.p_fire > 0.0 {
                    random.push((idx, p.p_fire));
                }
            }
        }
        let count = 1u64 << random.len();
        for mask in 0..count {
            let mut fired = certain.clone();
            let mut weight = 1.0;
            for (b, &(idx, p)) in random.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    fired.push(idx);
                    weight *= p;
                } else {
                    weight *= 1.0 - p;
                }
            }
            let a = ChannelAssignment::from_fired(fired, circuit.slot_count())?;
            acc.add(circuit, &a, weight, c_prime)?;
        }
        (ReferenceMethod::Exhaustive, count)
    } else {
        for i in 0..opts.mc_assignments {
            let mut rng = substream(opts.seed, domain::ORACLE, i);
            let a = sample_assignment(circuit, &mut rng);
            acc.add(circuit, &a, 1.0, c_prime)?;
        }
        (ReferenceMethod::MonteCarlo, opts.mc_assignments)
    };

    if !(acc.mass > 0.0) {
        return Err(SimError::Infeasible("no assignment passes the cluster-size rule".into()));
    }
    let mean: Vec<f64> = acc.sum.iter().map(|s| s / acc.mass).collect();
    Ok(ConditionedReference {
        distribution: distribution_from_diagonal(&mean)?,
        acceptance: acc.mass / acc.total,
        method,
        assignments,
        non_positive_outputs: acc.non_positive,
    })
}
