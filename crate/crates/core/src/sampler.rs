//! Two-step sampler: draw a channel assignment, reject it when its largest
//! closed cluster is too big, otherwise contract the small clusters and
//! resolve every entanglement-breaking event as a measurement.
//!
//! Qubits are kept in groups that are jointly entangled. A fired horizontal
//! map merges the groups it touches. A fired noise slot samples its POVM from
//! the qubit's marginal, conditions the rest of the group on the outcome and
//! splits the qubit off in the prepared state. At the end each group is
//! measured in the computational basis.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::channel::{sample_index, DenseOperator, Superoperator};
use crate::error::{Result, SimError};
use crate::linalg::{self, CMat};
use crate::oracle::distribution_from_diagonal;
use crate::percolation::{build_percolation_config, max_closed_cluster, sample_assignment, ChannelAssignment};
use crate::rng::{domain, substream};
use crate::trotter::{SlotKind, TrotterCircuit};

pub const DEFAULT_C_PRIME: f64 = 3.0;
/// Hard limit on jointly contracted qubits.
pub const CONTRACTION_CAP: usize = 12;
/// Total attempts allowed per requested sample, pooled over the run.
pub const RETRY_FACTOR: u64 = 100;

/// Largest accepted closed cluster: `c' ln(max(n, 2))`.
pub fn cluster_bound(c_prime: f64, n: usize) -> f64 {
    c_prime * (n.max(2) as f64).ln()
}

#[derive(Debug, Clone)]
pub struct ClusterOp {
    /// Global slot index; ops must be in increasing order.
    pub slot: u64,
    /// Positions within the cluster's qubit list.
    pub positions: Vec<usize>,
    pub map: Superoperator,
}

/// A piece of the circuit restricted to a set of qubits.
#[derive(Debug, Clone)]
pub struct ClusterCircuit {
    pub qubits: Vec<usize>,
    /// Inputs per qubit, in the order of `qubits`.
    pub inputs: Vec<DenseOperator>,
    pub ops: Vec<ClusterOp>,
}

/// Dense evolution of a cluster through its fired maps.
pub fn contract_cluster(cc: &ClusterCircuit) -> Result<DenseOperator> {
    let k = cc.qubits.len();
    if k > CONTRACTION_CAP {
        return Err(SimError::ContractionCap { qubits: k, cap: CONTRACTION_CAP });
    }
    if cc.inputs.len() != k || cc.inputs.iter().any(|s| s.dim() != 2) {
        return Err(SimError::DimensionMismatch(format!("{} inputs for {k} qubits", cc.inputs.len())));
    }
    if cc.ops.windows(2).any(|w| w[0].slot >= w[1].slot) {
        return Err(SimError::InvalidModel("cluster operations are not time ordered".into()));
    }
    let mut rho = linalg::kron_all(cc.inputs.iter().map(|s| s.matrix()));
    for op in &cc.ops {
        linalg::apply_local_superop(&mut rho, k, &op.positions, op.map.matrix())?;
    }
    DenseOperator::new(rho)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EbOutcome {
    pub slot: u64,
    pub site: usize,
    pub outcome: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EbTrace {
    pub events: Vec<EbOutcome>,
    /// Final computational-basis bits, site order.
    pub bits: Vec<u8>,
    /// Largest group contracted at any time.
    pub max_group: usize,
}

#[derive(Debug, Clone)]
struct Group {
    qubits: Vec<usize>,
    rho: CMat,
}

fn invalid_marginal(e: SimError) -> SimError {
    match e {
        SimError::InvalidPovm(msg) => SimError::Numerical(format!("marginal is not a valid state: {msg}")),
        other => other,
    }
}

/// Resolves a fired assignment in time order (see the module notes).
pub fn sequential_eb_sampling<R: Rng + ?Sized>(
    circuit: &TrotterCircuit,
    assignment: &ChannelAssignment,
    rng: &mut R,
) -> Result<EbTrace> {
    let model = circuit.model();
    let n = model.n();
    let noise = &model.noise;
    let mut groups: Vec<Option<Group>> = model
        .initial
        .iter()
        .enumerate()
        .map(|(q, s)| Some(Group { qubits: vec![q], rho: s.matrix().clone() }))
        .collect();
    let mut group_of: Vec<usize> = (0..n).collect();
    let mut events = Vec::new();
    let mut max_group = 1;
    let per_step = circuit.slots_per_step() as u64;

    for &idx in assignment.fired() {
        let kind = circuit.pattern()[(idx % per_step) as usize].kind;
        match kind {
            SlotKind::Horizontal { term } => {
                let support = &model.terms[term].support;
                let mut seen: Vec<usize> = Vec::new();
                for &s in support {
                    if !seen.contains(&group_of[s]) {
                        seen.push(group_of[s]);
                    }
                }
                let total: usize = seen.iter().map(|&id| groups[id].as_ref().map_or(0, |g| g.qubits.len())).sum();
                if total > CONTRACTION_CAP {
                    return Err(SimError::ContractionCap { qubits: total, cap: CONTRACTION_CAP });
                }
                let mut merged = groups[seen[0]].take().expect("live group");
                for &id in &seen[1..] {
                    let g = groups[id].take().expect("live group");
                    merged.rho = linalg::kron(&merged.rho, &g.rho);
                    merged.qubits.extend(g.qubits);
                }
                for &q in &merged.qubits {
                    group_of[q] = seen[0];
                }
                let positions: Vec<usize> = support
                    .iter()
                    .map(|s| merged.qubits.iter().position(|q| q == s).expect("qubit in merged group"))
                    .collect();
                let k = merged.qubits.len();
                linalg::apply_local_superop(&mut merged.rho, k, &positions, circuit.fired_map(term).matrix())?;
                max_group = max_group.max(k);
                groups[seen[0]] = Some(merged);
            }
            SlotKind::Noise { site } => {
                let id = group_of[site];
                let mut g = groups[id].take().expect("live group");
                let k = g.qubits.len();
                let pos = g.qubits.iter().position(|&q| q == site).expect("qubit in its group");
                let marginal = if k == 1 { g.rho.clone() } else { linalg::partial_trace_keep(&g.rho, k, &[pos])? };
                let probs = noise.outcome_probabilities(&marginal).map_err(invalid_marginal)?;
                let outcome = sample_index(&probs, rng);
                events.push(EbOutcome { slot: idx, site, outcome });
                let prepared = noise.states[outcome].matrix().clone();
                if k == 1 {
                    g.rho = prepared;
                    groups[id] = Some(g);
                } else {
                    let rest = linalg::contract_qubit(&g.rho, k, pos, noise.povm[outcome].matrix())?;
                    let p = probs[outcome];
                    g.rho = rest.unscale(p);
                    g.qubits.remove(pos);
                    groups[id] = Some(g);
                    // Reuse the slot of a dead group for the split-off qubit.
                    let free = groups.iter().position(Option::is_none).expect("a group slot is free");
                    groups[free] = Some(Group { qubits: vec![site], rho: prepared });
                    group_of[site] = free;
                }
            }
        }
    }

    let mut bits = vec![0u8; n];
    let mut order: Vec<&Group> = groups.iter().flatten().collect();
    order.sort_by_key(|g| g.qubits.iter().copied().min());
    for g in order {
        let k = g.qubits.len();
        let diag: Vec<f64> = (0..1usize << k).map(|i| g.rho[(i, i)].re).collect();
        let probs = distribution_from_diagonal(&diag)?;
        let outcome = sample_index(&probs, rng);
        for (j, &q) in g.qubits.iter().enumerate() {
            bits[q] = ((outcome >> (k - 1 - j)) & 1) as u8;
        }
    }
    Ok(EbTrace { events, bits, max_group })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bitstring: Option<String>,
    pub accepted: bool,
    pub max_cluster: usize,
    pub n_noise_events: usize,
    /// `seed/sample/attempt`, enough to replay the draw.
    pub seed_path: String,
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// One attempt: percolation draw, cluster-size rule, then contraction.
pub fn sample_once<R: Rng + ?Sized>(circuit: &TrotterCircuit, c_prime: f64, rng: &mut R) -> Result<SampleRecord> {
    if !(c_prime > 0.0) {
        return Err(SimError::Config(format!("c' must be positive, got {c_prime}")));
    }
    let assignment = sample_assignment(circuit, rng);
    let cfg = build_percolation_config(circuit, &assignment, circuit.tau_block())?;
    let max_cluster = max_closed_cluster(&cfg.grid, &cfg.open);
    let per_step = circuit.slots_per_step() as u64;
    let n_noise_events = assignment
        .fired()
        .iter()
        .filter(|&&i| matches!(circuit.pattern()[(i % per_step) as usize].kind, SlotKind::Noise { .. }))
        .count();
    if max_cluster as f64 > cluster_bound(c_prime, circuit.n()) {
        return Ok(SampleRecord { bitstring: None, accepted: false, max_cluster, n_noise_events, seed_path: String::new() });
    }
    let trace = sequential_eb_sampling(circuit, &assignment, rng)?;
    Ok(SampleRecord {
        bitstring: Some(bits_to_string(&trace.bits)),
        accepted: true,
        max_cluster,
        n_noise_events,
        seed_path: String::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub samples: usize,
    pub attempts: u64,
    pub rejection_rate: f64,
    pub counts: BTreeMap<String, u64>,
    /// Histogram of the largest closed cluster over all attempts.
    pub cluster_histogram: BTreeMap<usize, u64>,
    #[serde(skip)]
    pub records: Vec<SampleRecord>,
}

impl SampleSummary {
    /// Empirical distribution indexed like the oracle (site 0 most significant).
    pub fn distribution(&self, n: usize) -> Result<Vec<f64>> {
        if n > 24 {
            return Err(SimError::SizeGuard(format!("dense distribution over {n} bits")));
        }
        let mut p = vec![0.0; 1 << n];
        for (bits, &count) in &self.counts {
            let idx = usize::from_str_radix(bits, 2).map_err(|e| SimError::Numerical(e.to_string()))?;
            p[idx] += count as f64 / self.samples as f64;
        }
        Ok(p)
    }

    /// The `k` most frequent bitstrings (ties broken by bitstring).
    pub fn top(&self, k: usize) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self.counts.iter().map(|(b, &c)| (b.clone(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

fn sample_with_retries(
    circuit: &TrotterCircuit,
    c_prime: f64,
    seed: u64,
    index: u64,
    budget: u64,
) -> Result<Vec<SampleRecord>> {
    let mut rng = substream(seed, domain::ASSIGNMENT, index);
    let mut records = Vec::new();
    for attempt in 0..budget {
        let mut rec = sample_once(circuit, c_prime, &mut rng)?;
        rec.seed_path = format!("{seed}/{index}/{attempt}");
        let accepted = rec.accepted;
        records.push(rec);
        if accepted {
            return Ok(records);
        }
    }
    Err(SimError::RetryBudgetExhausted { sample: index, attempts: budget })
}

/// Draws `n_samples` accepted samples. Sample `i` uses its own substream and
/// retries within it until accepted, so the result does not depend on
/// `workers`. The run fails once the attempts exceed `RETRY_FACTOR` times the
/// requested samples.
pub fn sample_distribution(
    circuit: &TrotterCircuit,
    c_prime: f64,
    n_samples: usize,
    workers: usize,
    seed: u64,
) -> Result<SampleSummary> {
    use rayon::prelude::*;
    if n_samples == 0 {
        return Err(SimError::Config("at least one sample is required".into()));
    }
    let budget = RETRY_FACTOR * n_samples as u64;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    let per_sample: Vec<Vec<SampleRecord>> = pool.install(|| {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| sample_with_retries(circuit, c_prime, seed, i, budget))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut counts = BTreeMap::new();
    let mut cluster_histogram = BTreeMap::new();
    let mut records = Vec::new();
    for rec in per_sample.into_iter().flatten() {
        *cluster_histogram.entry(rec.max_cluster).or_insert(0) += 1;
        if let Some(b) = &rec.bitstring {
            *counts.entry(b.clone()).or_insert(0) += 1;
        }
        records.push(rec);
    }
    let attempts = records.len() as u64;
    if attempts > budget {
        return Err(SimError::RetryBudgetExhausted { sample: n_samples as u64, attempts });
    }
    Ok(SampleSummary {
        samples: n_samples,
        attempts,
        rejection_rate: (attempts - n_samples as u64) as f64 / attempts as f64,
        counts,
        cluster_histogram,
        records,
    })
}
