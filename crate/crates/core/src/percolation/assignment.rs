use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::grid::Grid;
use crate::error::{Result, SimError};
use crate::trotter::{SlotKind, TrotterCircuit};

/// Which slots took their non-identity branch. Stored sparsely as the sorted
/// global indices of fired slots, since almost all slots stay idle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelAssignment {
    fired: Vec<u64>,
    len: u64,
}

impl ChannelAssignment {
    pub fn from_fired(mut fired: Vec<u64>, len: u64) -> Result<Self> {
        fired.sort_unstable();
        fired.dedup();
        if fired.last().is_some_and(|&i| i >= len) {
            return Err(SimError::DimensionMismatch(format!(
                "fired slot index beyond circuit length {len}"
            )));
        }
        Ok(Self { fired, len })
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let fired = bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u64).collect();
        Self { fired, len: bits.len() as u64 }
    }

    pub fn none(len: u64) -> Self {
        Self { fired: Vec::new(), len }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fired(&self) -> &[u64] {
        &self.fired
    }

    pub fn fired_count(&self) -> usize {
        self.fired.len()
    }

    pub fn is_fired(&self, index: u64) -> bool {
        self.fired.binary_search(&index).is_ok()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = vec![false; self.len as usize];
        for &i in &self.fired {
            bits[i as usize] = true;
        }
        bits
    }
}

/// Draws every slot independently with its firing probability. Idle stretches
/// are skipped with geometric gaps, one stream per pattern position.
pub fn sample_assignment<R: Rng + ?Sized>(circuit: &TrotterCircuit, rng: &mut R) -> ChannelAssignment {
    let per_step = circuit.slots_per_step() as u64;
    let steps = circuit.n_steps() as u64;
    let mut fired = Vec::new();
    for (pos, slot) in circuit.pattern().iter().enumerate() {
        let p = slot.p_fire;
        if p <= 0.0 {
            continue;
        }
        if p >= 1.0 {
            fired.extend((0..steps).map(|s| s * per_step + pos as u64));
            continue;
        }
        let gap = Geometric::new(p).expect("probability in (0, 1)");
        let mut step = gap.sample(rng);
        while step < steps {
            fired.push(step * per_step + pos as u64);
            step = step.saturating_add(1).saturating_add(gap.sample(rng));
        }
    }
    fired.sort_unstable();
    ChannelAssignment { fired, len: circuit.slot_count() }
}

/// Open/closed states on the blocked space-time lattice. Vertex `q * n + site`
/// is site `site` during time block `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolationConfig {
    pub grid: Grid,
    pub open: Vec<bool>,
    /// Steps per block.
    pub block_size: usize,
    pub tau: f64,
}

impl PercolationConfig {
    pub fn n_sites(&self) -> usize {
        self.grid.len() / self.grid.dims()[0]
    }

    pub fn n_blocks(&self) -> usize {
        self.grid.dims()[0]
    }

    pub fn is_open(&self, site: usize, block: usize) -> bool {
        self.open[block * self.n_sites() + site]
    }
}

/// Space-time grid for a circuit with `blocks` time blocks.
pub fn space_time_grid(circuit: &TrotterCircuit, blocks: usize) -> Result<Grid> {
    let lattice = &circuit.model().lattice;
    let mut dims = vec![blocks];
    dims.extend_from_slice(lattice.dims());
    let mut periodic = vec![false];
    periodic.extend(std::iter::repeat_n(lattice.periodic(), lattice.d()));
    Grid::new(dims, periodic)
}

/// Block size `m = round(N tau / t)` (all steps in one block when `t = 0`).
pub fn block_size_for(circuit: &TrotterCircuit, tau: f64) -> Result<usize> {
    let n_steps = circuit.n_steps();
    let t = circuit.model().t;
    let m = if t > 0.0 { (n_steps as f64 * tau / t).round() } else { n_steps as f64 };
    if !(m >= 1.0) || m > n_steps as f64 || !n_steps.is_multiple_of(m as usize) {
        return Err(SimError::BlockMisaligned { block: m.max(0.0) as usize, steps: n_steps });
    }
    Ok(m as usize)
}

/// Vertex `(i, q)` is open iff no horizontal slot touching qubit `i` fired in
/// block `q` and at least one noise slot on `i` fired in that block.
pub fn build_percolation_config(
    circuit: &TrotterCircuit,
    assignment: &ChannelAssignment,
    tau: f64,
) -> Result<PercolationConfig> {
    if assignment.len() != circuit.slot_count() {
        return Err(SimError::DimensionMismatch(format!(
            "assignment of length {} for a circuit of {} slots",
            assignment.len(),
            circuit.slot_count()
        )));
    }
    let m = block_size_for(circuit, tau)?;
    let blocks = circuit.n_steps() / m;
    let n = circuit.n();
    let per_step = circuit.slots_per_step() as u64;
    let mut touched = vec![false; blocks * n];
    let mut refreshed = vec![false; blocks * n];
    for &idx in assignment.fired() {
        let step = (idx / per_step) as usize;
        let q = step / m;
        match circuit.pattern()[(idx % per_step) as usize].kind {
            SlotKind::Horizontal { term } => {
                for &s in &circuit.model().terms[term].support {
                    touched[q * n + s] = true;
                }
            }
            SlotKind::Noise { site } => refreshed[q * n + site] = true,
        }
    }
    let open = touched.iter().zip(&refreshed).map(|(&h, &r)| !h && r).collect();
    Ok(PercolationConfig { grid: space_time_grid(circuit, blocks)?, open, block_size: m, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{DenseOperator, EntanglementBreakingChannel, LindbladTerm};
    use crate::lattice::{Lattice, ModelSpec};
    use crate::trotter::{build_trotter_circuit_with, TrotterOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize, kappa: f64) -> ModelSpec {
        let terms = (0..n - 1)
            .map(|i| LindbladTerm::new(vec![i, i + 1], None, vec![DenseOperator::swap()]).unwrap())
            .collect();
        ModelSpec {
            lattice: Lattice::chain(n),
            terms,
            kappa,
            noise: EntanglementBreakingChannel::z_measure(),
            initial: vec![DenseOperator::ket0(); n],
            t: 1.0,
            interaction_range: None,
        }
    }

    #[test]
    fn idle_and_saturated_assignments() {
        let mut m = chain(3, 0.0);
        m.t = 0.0;
        let c = build_trotter_circuit_with(&m, 4, &TrotterOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_assignment(&c, &mut rng).fired_count(), 0);

        let mut m = chain(1, 1.0);
        m.terms.clear();
        let c = build_trotter_circuit_with(&m, 1, &TrotterOptions::default()).unwrap();
        assert_eq!(sample_assignment(&c, &mut rng).to_bits(), vec![true]);
    }

    #[test]
    fn fire_rate_matches_probability() {
        // One noise slot per step with p = kappa t / N = 0.2.
        let mut m = chain(1, 20_000.0);
        m.terms.clear();
        let c = build_trotter_circuit_with(&m, 100_000, &TrotterOptions::default()).unwrap();
        assert_eq!(c.pattern()[0].p_fire, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = sample_assignment(&c, &mut rng);
        let rate = a.fired_count() as f64 / 100_000.0;
        let sigma = (0.2f64 * 0.8 / 100_000.0).sqrt();
        assert!((rate - 0.2).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn percolation_rule_on_hand_assignments() {
        let m = chain(3, 60.0);
        let opts = TrotterOptions { g: Some(1.0), ..Default::default() };
        let c = build_trotter_circuit_with(&m, 40, &opts).unwrap();
        let tau = 0.25;
        let per_step = c.slots_per_step() as u64;
        // Noise on every qubit in every step.
        let noise: Vec<u64> = (0..40u64)
            .flat_map(|s| {
                c.pattern()
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| matches!(p.kind, SlotKind::Noise { .. }))
                    .map(move |(j, _)| s * per_step + j as u64)
            })
            .collect();
        let all_open = build_percolation_config(
            &c,
            &ChannelAssignment::from_fired(noise.clone(), c.slot_count()).unwrap(),
            tau,
        )
        .unwrap();
        assert_eq!(all_open.block_size, 10);
        assert!(all_open.open.iter().all(|&o| o));

        let none = build_percolation_config(&c, &ChannelAssignment::none(c.slot_count()), tau).unwrap();
        assert!(none.open.iter().all(|&o| !o));

        // A horizontal fire on term {1, 2} during step 23 (block 2).
        let h = c
            .pattern()
            .iter()
            .position(|p| p.kind == SlotKind::Horizontal { term: 1 })
            .unwrap() as u64;
        let mut fired = noise;
        fired.push(23 * per_step + h);
        let cfg = build_percolation_config(&c, &ChannelAssignment::from_fired(fired, c.slot_count()).unwrap(), tau)
            .unwrap();
        let closed: Vec<(usize, usize)> = (0..4)
            .flat_map(|q| (0..3).map(move |i| (i, q)))
            .filter(|&(i, q)| !cfg.is_open(i, q))
            .collect();
        assert_eq!(closed, vec![(1, 2), (2, 2)]);
    }

    #[test]
    fn misaligned_blocks_are_rejected() {
        let m = chain(2, 5.0);
        let c = build_trotter_circuit_with(&m, 30, &TrotterOptions::default()).unwrap();
        let a = ChannelAssignment::none(c.slot_count());
        assert!(matches!(
            build_percolation_config(&c, &a, 0.13),
            Err(SimError::BlockMisaligned { .. })
        ));
        assert!(build_percolation_config(&c, &a, c.tau_block()).is_ok());
    }
}
