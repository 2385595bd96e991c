//! Restart gadget for noise with a non-trivial fixed point: majority
//! compression of weakly polarized qubits, and the noisy shift that refills
//! the auxiliary qubits between restarts.

use serde::Serialize;

use crate::channel::{min_choi_eigenvalue, DenseOperator, EntanglementBreakingChannel, Superoperator};
use crate::error::{Result, SimError};
use crate::linalg::{self, apply_local_superop, c, kron, partial_trace_keep, CMat, C64, ONE, ZERO};

/// Largest auxiliary count for the dense shift cross-check (`2m + 1` qubits).
pub const MAX_SHIFT_SIM_M: usize = 4;
/// Largest auxiliary count for the restart-cycle simulation (`2m + 1` qubits).
pub const MAX_RESTART_M: usize = 3;

const BASIS_TOL: f64 = 1e-9;

/// `λ_max − λ_min` of a single-qubit state.
pub fn polarization(sigma: &DenseOperator) -> Result<f64> {
    if sigma.dim() != 2 || !sigma.is_density_matrix(1e-9) {
        return Err(SimError::InvalidOperator("polarization needs a single-qubit density matrix".into()));
    }
    let ev = sigma.eigenvalues();
    Ok((ev[1] - ev[0]).clamp(0.0, 1.0))
}

/// One-step boost of three equally polarized qubits.
pub fn compression_map(eps: f64) -> f64 {
    (3.0 * eps - eps.powi(3)) / 2.0
}

/// A qubit state with its polarization and eigenbasis. `phi_plus` is the
/// dominant eigenvector, carrying weight `(1 + ε) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedState {
    pub sigma: DenseOperator,
    pub epsilon: f64,
    pub phi_plus: [C64; 2],
    pub phi_minus: [C64; 2],
}

impl PolarizedState {
    pub fn new(sigma: DenseOperator) -> Result<Self> {
        let epsilon = polarization(&sigma)?;
        let (_, vecs) = linalg::hermitian_eigen(sigma.matrix());
        let col = |j: usize| [vecs[(0, j)], vecs[(1, j)]];
        Ok(Self { sigma, epsilon, phi_plus: col(1), phi_minus: col(0) })
    }

    /// `diag((1+ε)/2, (1−ε)/2)` in the computational basis.
    pub fn diagonal(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(SimError::InvalidOperator(format!("polarization {epsilon} outside [0, 1]")));
        }
        let sigma = DenseOperator::from_real_rows(&[&[(1.0 + epsilon) / 2.0, 0.0], &[0.0, (1.0 - epsilon) / 2.0]])?;
        Ok(Self {
            sigma,
            epsilon,
            phi_plus: [ONE, ZERO],
            phi_minus: [ZERO, ONE],
        })
    }

    /// Unitary whose columns are `(phi_plus, phi_minus)`.
    fn basis_unitary(&self) -> CMat {
        CMat::from_column_slice(2, 2, &[self.phi_plus[0], self.phi_plus[1], self.phi_minus[0], self.phi_minus[1]])
    }

    /// `<phi_plus| sigma |phi_plus>`, which is `(1 + ε)/2` for these states.
    pub fn fidelity_plus(&self) -> f64 {
        overlap(&self.phi_plus, self.sigma.matrix())
    }
}

fn overlap(v: &[C64; 2], m: &CMat) -> f64 {
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    acc.re
}

/// Basis permutation of three qubits (first most significant) that exchanges
/// `|100>` and `|011>`, so the first qubit ends up holding the majority value.
pub fn majority_permutation() -> [usize; 8] {
    let mut p = [0, 1, 2, 3, 4, 5, 6, 7];
    p.swap(0b100, 0b011);
    p
}

fn permutation_matrix(perm: &[usize]) -> CMat {
    let d = perm.len();
    let mut m = CMat::zeros(d, d);
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = ONE;
    }
    m
}

#[derive(Debug, Clone)]
pub struct CompressionOutput {
    pub target: PolarizedState,
    pub residuals: [DenseOperator; 2],
    /// Joint three-qubit state after the compression.
    pub joint: DenseOperator,
}

/// Applies the majority permutation (in the shared eigenbasis) to
/// `σ1 ⊗ σ2 ⊗ σ3`; the first qubit is the target.
pub fn basic_compression(states: [&PolarizedState; 3]) -> Result<CompressionOutput> {
    let reference = states.iter().find(|s| s.epsilon > BASIS_TOL).copied().unwrap_or(states[0]);
    for s in states {
        if s.epsilon > BASIS_TOL {
            let ip: C64 = (0..2).map(|i| reference.phi_plus[i].conj() * s.phi_plus[i]).sum();
            if (ip.norm() - 1.0).abs() > BASIS_TOL {
                return Err(SimError::InvalidOperator("compression inputs do not share an eigenbasis".into()));
            }
        }
    }
    let u1 = reference.basis_unitary();
    let u = kron(&kron(&u1, &u1), &u1);
    let p = permutation_matrix(&majority_permutation());
    let w = &u * p * linalg::dagger(&u);
    let rho = kron(&kron(states[0].sigma.matrix(), states[1].sigma.matrix()), states[2].sigma.matrix());
    let out = &w * rho * linalg::dagger(&w);
    let target = DenseOperator::new(partial_trace_keep(&out, 3, &[0])?)?;
    let r1 = DenseOperator::new(partial_trace_keep(&out, 3, &[1])?)?;
    let r2 = DenseOperator::new(partial_trace_keep(&out, 3, &[2])?)?;
    let mut target = PolarizedState::new(target)?;
    // Keep the input basis orientation; eigen ordering is arbitrary when ε = 0.
    target.phi_plus = reference.phi_plus;
    target.phi_minus = reference.phi_minus;
    Ok(CompressionOutput { target, residuals: [r1, r2], joint: DenseOperator::new(out)? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingSchedule {
    pub m: usize,
    /// `rounds[r]` lists the triples compressed in round `r`, target first.
    pub rounds: Vec<Vec<[usize; 3]>>,
    /// Polarization of the surviving targets after each round, starting with the input.
    pub ladder: Vec<f64>,
    pub achieved: f64,
}

/// Recursive majority compression of `m = 3^k` equally polarized qubits.
/// Errors when `m` is not a power of three or when the result misses `1 − η`.
pub fn cooling_circuit(m: usize, eps_in: f64, eta: f64) -> Result<CoolingSchedule> {
    if !(eps_in > 0.0 && eps_in <= 1.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(SimError::Infeasible(format!("need ε_in in (0, 1] and η in (0, 1), got {eps_in}, {eta}")));
    }
    let k = power_of_three(m).ok_or_else(|| SimError::Infeasible(format!("m = {m} is not a power of 3")))?;
    let mut rounds = Vec::with_capacity(k);
    let mut ladder = vec![eps_in];
    let mut stride = 1;
    for _ in 0..k {
        rounds.push((0..m).step_by(3 * stride).map(|i| [i, i + stride, i + 2 * stride]).collect());
        ladder.push(compression_map(*ladder.last().unwrap()));
        stride *= 3;
    }
    let achieved = *ladder.last().unwrap();
    if achieved < 1.0 - eta {
        return Err(SimError::Infeasible(format!(
            "{m} qubits reach polarization {achieved:.6}, short of 1 - η = {:.6}",
            1.0 - eta
        )));
    }
    Ok(CoolingSchedule { m, rounds, ladder, achieved })
}

fn power_of_three(m: usize) -> Option<usize> {
    let (mut x, mut k) = (m, 0);
    while x > 1 && x % 3 == 0 {
        x /= 3;
        k += 1;
    }
    (x == 1).then_some(k)
}

/// The whole schedule as a permutation of the `2^m` basis states (qubit 0
/// most significant), in the eigenbasis of the inputs.
pub fn schedule_permutation(schedule: &CoolingSchedule) -> Result<Vec<usize>> {
    let m = schedule.m;
    if m > 20 {
        return Err(SimError::SizeGuard(format!("{m} qubits is too many for an explicit permutation")));
    }
    let maj = majority_permutation();
    let bit = |x: usize, q: usize| (x >> (m - 1 - q)) & 1;
    let perm = (0..1usize << m)
        .map(|mut x| {
            for round in &schedule.rounds {
                for t in round {
                    let local = (bit(x, t[0]) << 2) | (bit(x, t[1]) << 1) | bit(x, t[2]);
                    let mapped = maj[local];
                    for (j, &q) in t.iter().enumerate() {
                        let b = (mapped >> (2 - j)) & 1;
                        x = (x & !(1 << (m - 1 - q))) | (b << (m - 1 - q));
                    }
                }
            }
            x
        })
        .collect();
    Ok(perm)
}

/// Exact target polarization of a schedule on `σ(ε)^{⊗m}`, computed from
/// the full diagonal distribution (the inputs are diagonal in their basis).
pub fn brute_force_cooling(schedule: &CoolingSchedule, eps: f64) -> Result<f64> {
    let m = schedule.m;
    let perm = schedule_permutation(schedule)?;
    let p0 = (1.0 + eps) / 2.0;
    let mut target0 = 0.0;
    for (x, &y) in perm.iter().enumerate() {
        let ones = x.count_ones() as i32;
        let w = p0.powi(m as i32 - ones) * (1.0 - p0).powi(ones);
        if (y >> (m - 1)) & 1 == 0 {
            target0 += w;
        }
    }
    Ok(2.0 * target0 - 1.0)
}

/// Time allowed for the dissipation stage so the shift does not increase the
/// failure probability `q`.
pub fn tau_d_bound(m: usize, kappa: f64, tau_s: f64, q: f64) -> Result<f64> {
    if m == 0 || !(kappa > 0.0) || !(tau_s > 0.0) || !(q > 0.0 && q < 1.0) {
        return Err(SimError::Infeasible(format!(
            "tau_d bound needs m >= 1, κ > 0, τ_s > 0, q in (0, 1); got {m}, {kappa}, {tau_s}, {q}"
        )));
    }
    let e = (-2.0 * m as f64 * kappa * tau_s).exp();
    let one_minus_e = -(-2.0 * m as f64 * kappa * tau_s).exp_m1();
    let ratio = (1.0 - q) * one_minus_e / (1.0 - (1.0 - q) * e);
    let x = ratio.powf(1.0 / m as f64);
    if !(x < 1.0) {
        return Err(SimError::Infeasible(format!("log argument {} is not positive", 1.0 - x)));
    }
    Ok(-(-x).ln_1p() / kappa)
}

/// Leading small-`κ` form of [`tau_d_bound`].
pub fn tau_d_small_kappa(m: usize, kappa: f64, tau_s: f64, q: f64) -> f64 {
    let mf = m as f64;
    (2.0 * mf * (1.0 - q) / q).powf(1.0 / mf) * (kappa * tau_s).powf(1.0 / mf) / kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftExperiment {
    pub m: usize,
    pub kappa: f64,
    pub tau_s: f64,
    pub tau_d: f64,
    pub q: f64,
}

impl ShiftExperiment {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa >= 0.0 && self.tau_s >= 0.0 && self.tau_d >= 0.0 && (0.0..1.0).contains(&self.q);
        if !ok || self.m == 0 {
            return Err(SimError::Infeasible(format!("invalid shift experiment {self:?}")));
        }
        Ok(())
    }
}

/// Which factor multiplies the all-qubits-refreshed term of `1 − q'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShiftFormula {
    /// `1 − e^{−2mκτ_s}(1 − q)`: the complement of the perfect-shift event,
    /// which is what the `τ_d` bound inverts.
    Consistent,
    /// `1 − e^{−2κτ_s}(1 − q)`, a single pair's survival in place of all `m`.
    SinglePair,
}

/// Closed-form failure probability `q'` after one shift layer and `τ_d` of
/// pure dissipation.
pub fn shift_failure(exp: &ShiftExperiment, formula: ShiftFormula) -> f64 {
    let mf = exp.m as f64;
    let perfect = (-2.0 * mf * exp.kappa * exp.tau_s).exp() * (1.0 - exp.q);
    let refreshed = (-(-exp.kappa * exp.tau_d).exp_m1()).powi(exp.m as i32);
    let complement = match formula {
        ShiftFormula::Consistent => 1.0 - perfect,
        ShiftFormula::SinglePair => 1.0 - (-2.0 * exp.kappa * exp.tau_s).exp() * (1.0 - exp.q),
    };
    1.0 - (perfect + refreshed * complement)
}

/// Numerical check of the shift on `2m + 1` qubits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSimCheck {
    /// `1 −` trace of the separable-output branch.
    pub q_prime: f64,
    /// Minimum Choi eigenvalue of (pair channel − `e^{−2κτ_s}` SWAP).
    pub swap_remainder_min_choi: f64,
    /// Minimum Choi eigenvalue of the refresh channel `N'`.
    pub refresh_min_choi: f64,
    /// Minimum eigenvalue of the separable-output branch.
    pub branch_min_eig: f64,
    /// Minimum eigenvalue of the final state minus that branch.
    pub rest_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftOutcome {
    pub q_prime: f64,
    pub q_prime_single_pair: f64,
    pub sim: Option<ShiftSimCheck>,
}

/// `q'` in closed form, plus a dense simulation for `m <= MAX_SHIFT_SIM_M`.
///
/// The simulation uses qubits `0..=2m`; SWAP pairs are `(2k−1, 2k)`, so the
/// states held on the even qubits `2..=2m` move to the odd ones. During `τ_s`
/// each pair evolves under `(π/(2τ_s))(I − SWAP)` plus noise `κ(N − Id)` on
/// every qubit, and during `τ_d` under noise alone. The input is
/// `(1 − q) ρ_good + q ρ_bad` with `ρ_good` holding `sigma` on the even qubits
/// and `|+>` elsewhere, and `ρ_bad` a GHZ state. The separable-output branch is
/// the perfect-shift branch of the good input plus the branch where every
/// output qubit was refreshed by the noise.
pub fn shift_with_noise_sim(
    exp: &ShiftExperiment,
    noise: &EntanglementBreakingChannel,
    sigma: &DenseOperator,
) -> Result<ShiftOutcome> {
    exp.validate()?;
    let q_prime = shift_failure(exp, ShiftFormula::Consistent);
    let q_prime_single_pair = shift_failure(exp, ShiftFormula::SinglePair);
    let sim = if exp.m <= MAX_SHIFT_SIM_M && exp.tau_s > 0.0 {
        Some(simulate_shift(exp, noise, sigma)?)
    } else {
        None
    };
    Ok(ShiftOutcome { q_prime, q_prime_single_pair, sim })
}

fn noise_generator(noise: &EntanglementBreakingChannel, kappa: f64) -> CMat {
    (noise.superoperator().matrix() - CMat::identity(4, 4)).scale(kappa)
}

/// Superoperator of `positions`-local pieces acting on `n` qubits.
fn embed(n: usize, pieces: &[(Vec<usize>, &CMat)]) -> Result<CMat> {
    let d = 1usize << n;
    let mut out = CMat::zeros(d * d, d * d);
    for col in 0..d * d {
        let mut acc = CMat::zeros(d, d);
        for (pos, s) in pieces {
            let mut e = CMat::zeros(d, d);
            e[(col % d, col / d)] = ONE;
            apply_local_superop(&mut e, n, pos, s)?;
            acc += e;
        }
        for (row, x) in acc.iter().enumerate() {
            out[(row, col)] = *x;
        }
    }
    Ok(out)
}

/// Exact channel of a noisy SWAP on two qubits over `tau_s`.
fn noisy_swap_channel(noise: &EntanglementBreakingChannel, kappa: f64, tau_s: f64) -> Result<CMat> {
    let id2 = CMat::identity(4, 4);
    let swap = DenseOperator::swap();
    let h = (&id2 - swap.matrix()).scale(std::f64::consts::PI / (2.0 * tau_s));
    let ham = (kron(&id2, &h) - kron(&h.transpose(), &id2)) * c(0.0, -1.0);
    let ng = noise_generator(noise, kappa);
    let gen = ham + embed(2, &[(vec![0], &ng), (vec![1], &ng)])?;
    linalg::expm(&gen.scale(tau_s))
}

fn single_noise_channel(noise: &EntanglementBreakingChannel, kappa: f64, t: f64) -> Result<CMat> {
    linalg::expm(&noise_generator(noise, kappa).scale(t))
}

fn simulate_shift(exp: &ShiftExperiment, noise: &EntanglementBreakingChannel, sigma: &DenseOperator) -> Result<ShiftSimCheck> {
    let m = exp.m;
    let n = 2 * m + 1;
    let pair = noisy_swap_channel(noise, exp.kappa, exp.tau_s)?;
    let idle = single_noise_channel(noise, exp.kappa, exp.tau_s)?;
    let dissipate = single_noise_channel(noise, exp.kappa, exp.tau_d)?;
    let swap_conj = Superoperator::conjugation(&DenseOperator::swap()).matrix().clone();

    let w_pair = (-2.0 * exp.kappa * exp.tau_s).exp();
    let swap_remainder_min_choi = min_choi_eigenvalue(&Superoperator::new(2, &pair - swap_conj.scale(w_pair))?);
    let stay = (-exp.kappa * exp.tau_d).exp();
    let fire = 1.0 - stay;
    let refresh = if fire > 0.0 {
        (&dissipate - CMat::identity(4, 4).scale(stay)).unscale(fire)
    } else {
        noise.superoperator().matrix().clone()
    };
    let refresh_min_choi = min_choi_eigenvalue(&Superoperator::new(1, refresh.clone())?);

    let plus = DenseOperator::plus();
    let good = linalg::kron_all((0..n).map(|q| if q > 0 && q % 2 == 0 { sigma.matrix() } else { plus.matrix() }));
    let d = 1usize << n;
    let mut ghz = CMat::zeros(d, d);
    for (i, j) in [(0, 0), (0, d - 1), (d - 1, 0), (d - 1, d - 1)] {
        ghz[(i, j)] = c(0.5, 0.0);
    }
    let rho_in = good.scale(1.0 - exp.q) + ghz.scale(exp.q);

    let pairs: Vec<[usize; 2]> = (1..=m).map(|k| [2 * k - 1, 2 * k]).collect();
    let apply_layer = |rho: &mut CMat, two: &CMat, one: &CMat| -> Result<()> {
        for p in &pairs {
            apply_local_superop(rho, n, p, two)?;
        }
        apply_local_superop(rho, n, &[0], one)
    };
    let mut after_swap = rho_in.clone();
    apply_layer(&mut after_swap, &pair, &idle)?;
    let mut perfect = good.scale((1.0 - exp.q) * w_pair.powi(m as i32));
    apply_layer(&mut perfect, &swap_conj, &idle)?;
    let not_perfect = &after_swap - &perfect;

    let outputs: Vec<usize> = (0..m).map(|k| 2 * k + 1).collect();
    let scaled_refresh = refresh.scale(fire);
    let mut rho_out = after_swap;
    let mut branch_a = perfect;
    let mut branch_b = not_perfect;
    for q in 0..n {
        apply_local_superop(&mut rho_out, n, &[q], &dissipate)?;
        apply_local_superop(&mut branch_a, n, &[q], &dissipate)?;
        let op = if outputs.contains(&q) { &scaled_refresh } else { &dissipate };
        apply_local_superop(&mut branch_b, n, &[q], op)?;
    }
    let branch = branch_a + branch_b;
    let branch_trace = linalg::trace(&branch).re;
    let rest = &rho_out - &branch;
    let hermitize = |m: &CMat| (m + linalg::dagger(m)).scale(0.5);
    Ok(ShiftSimCheck {
        q_prime: 1.0 - branch_trace,
        swap_remainder_min_choi,
        refresh_min_choi,
        branch_min_eig: linalg::hermitian_eigenvalues(&hermitize(&branch))[0],
        rest_min_eig: linalg::hermitian_eigenvalues(&hermitize(&rest))[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace {
    /// Fidelity of the restarted qubit with `phi_plus` after each round.
    pub fidelity: Vec<f64>,
}

/// Cool, swap and shift cycles on a computational qubit `c` (index 0), `m`
/// active auxiliaries `1..=m` and `m` reservoir qubits `m+1..=2m`.
///
/// The noise replaces any state by `σ = diag((1+ε)/2, (1−ε)/2)` at rate `κ`
/// and acts on every qubit at all times except during the instantaneous
/// compression. Each round compresses the auxiliaries (majority permutation
/// for `m = 3`), swaps the target into `c` over `τ_s`, records the fidelity,
/// then swaps reservoir into auxiliary qubits over `τ_s`, dissipates for
/// `τ_d`, and refills the reservoir with `σ`.
pub fn restart_fidelity_sim(m: usize, kappa: f64, tau_s: f64, tau_d: f64, eps_in: f64, rounds: usize) -> Result<RestartTrace> {
    if !(m == 1 || m == 3) || m > MAX_RESTART_M {
        return Err(SimError::SizeGuard(format!("restart simulation supports m = 1 or 3, got {m}")));
    }
    if !(kappa >= 0.0 && tau_s > 0.0 && tau_d >= 0.0) {
        return Err(SimError::Infeasible("need κ >= 0, τ_s > 0, τ_d >= 0".into()));
    }
    let sigma = PolarizedState::diagonal(eps_in)?;
    let noise = EntanglementBreakingChannel::replacement(sigma.sigma.clone());
    let n = 2 * m + 1;
    let pair = noisy_swap_channel(&noise, kappa, tau_s)?;
    let idle_s = single_noise_channel(&noise, kappa, tau_s)?;
    let idle_d = single_noise_channel(&noise, kappa, tau_d)?;
    let reset = noise.superoperator().matrix().clone();
    let compress = if m == 3 {
        let mut perm = vec![0usize; 1 << n];
        let maj = majority_permutation();
        let shift = n - 1 - m;
        for (x, y) in perm.iter_mut().enumerate() {
            let local = (x >> shift) & 0b111;
            *y = (x & !(0b111 << shift)) | (maj[local] << shift);
        }
        Some(permutation_matrix(&perm))
    } else {
        None
    };

    let ket1 = DenseOperator::ket1();
    let mut rho = linalg::kron_all((0..n).map(|q| if q == 0 { ket1.matrix() } else { sigma.sigma.matrix() }));
    let mut fidelity = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        if let Some(p) = &compress {
            rho = p * &rho * p.transpose();
        }
        apply_local_superop(&mut rho, n, &[0, 1], &pair)?;
        for q in 2..n {
            apply_local_superop(&mut rho, n, &[q], &idle_s)?;
        }
        let c = partial_trace_keep(&rho, n, &[0])?;
        fidelity.push(c[(0, 0)].re);

        apply_local_superop(&mut rho, n, &[0], &idle_s)?;
        for k in 1..=m {
            apply_local_superop(&mut rho, n, &[k, k + m], &pair)?;
        }
        for q in 0..n {
            apply_local_superop(&mut rho, n, &[q], &idle_d)?;
        }
        for q in m + 1..n {
            apply_local_superop(&mut rho, n, &[q], &reset)?;
        }
    }
    Ok(RestartTrace { fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarization_examples() {
        assert!(polarization(&DenseOperator::maximally_mixed(1)).unwrap().abs() < 1e-12);
        assert!((polarization(&DenseOperator::ket0()).unwrap() - 1.0).abs() < 1e-12);
        let s = DenseOperator::from_real_rows(&[&[0.6, 0.0], &[0.0, 0.4]]).unwrap();
        assert!((polarization(&s).unwrap() - 0.2).abs() < 1e-12);
        assert!(polarization(&DenseOperator::identity(1)).is_err());
    }

    #[test]
    fn compression_boosts_point_two() {
        let s = PolarizedState::diagonal(0.2).unwrap();
        let out = basic_compression([&s, &s, &s]).unwrap();
        assert!((out.target.epsilon - 0.296).abs() < 1e-12);
        assert!((out.target.fidelity_plus() - (1.0 + 0.296) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn compression_in_a_rotated_basis() {
        let plus_state = |eps: f64| {
            let m = DenseOperator::from_real_rows(&[&[0.5, eps / 2.0], &[eps / 2.0, 0.5]]).unwrap();
            PolarizedState::new(m).unwrap()
        };
        let s = plus_state(0.4);
        let out = basic_compression([&s, &s, &s]).unwrap();
        assert!((out.target.epsilon - compression_map(0.4)).abs() < 1e-12);
        let z = PolarizedState::diagonal(0.4).unwrap();
        assert!(basic_compression([&s, &z, &s]).is_err());
    }

    #[test]
    fn schedule_shapes() {
        let s = cooling_circuit(9, 0.2, 0.6).unwrap();
        assert_eq!(s.rounds, vec![vec![[0, 1, 2], [3, 4, 5], [6, 7, 8]], vec![[0, 3, 6]]]);
        assert!((s.achieved - compression_map(0.296)).abs() < 1e-15);
        assert!(cooling_circuit(6, 0.2, 0.5).is_err());
        assert!(matches!(cooling_circuit(3, 0.2, 0.1), Err(SimError::Infeasible(_))));
    }

    #[test]
    fn brute_force_matches_map_at_nine_qubits() {
        let s = cooling_circuit(9, 0.2, 0.6).unwrap();
        assert!((brute_force_cooling(&s, 0.2).unwrap() - s.achieved).abs() < 1e-12);
    }

    #[test]
    fn tau_d_bound_limits() {
        assert!(tau_d_bound(2, 1.0, 0.01, 1.0 - 1e-12).unwrap() < 1e-5);
        assert!(tau_d_bound(1, 1.0, 0.01, 0.0).is_err());
        // m = 1 reduces to -ln(1 - r)/κ with r = 0.9(1-e^{-0.02})/(1-0.9e^{-0.02}).
        let e = (-0.02f64).exp();
        let r = 0.9 * (1.0 - e) / (1.0 - 0.9 * e);
        let want = -(1.0 - r).ln();
        assert!((tau_d_bound(1, 1.0, 0.01, 0.1).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn shift_formula_cases() {
        let base = ShiftExperiment { m: 3, kappa: 0.0, tau_s: 0.1, tau_d: 0.0, q: 0.2 };
        assert!((shift_failure(&base, ShiftFormula::Consistent) - 0.2).abs() < 1e-15);
        let noisy = ShiftExperiment { kappa: 0.5, ..base };
        assert!(shift_failure(&noisy, ShiftFormula::Consistent) > 0.2);
        let tau_d = tau_d_bound(3, 0.5, 0.1, 0.2).unwrap();
        let at_bound = ShiftExperiment { tau_d, ..noisy };
        assert!((shift_failure(&at_bound, ShiftFormula::Consistent) - 0.2).abs() < 1e-12);
        assert!(shift_failure(&at_bound, ShiftFormula::SinglePair) > 0.2);
    }

    #[test]
    fn shift_simulation_agrees_with_closed_form() {
        let exp = ShiftExperiment { m: 2, kappa: 0.3, tau_s: 0.2, tau_d: 1.0, q: 0.1 };
        let out = shift_with_noise_sim(&exp, &EntanglementBreakingChannel::z_measure(), &DenseOperator::ket0()).unwrap();
        let sim = out.sim.unwrap();
        assert!((sim.q_prime - out.q_prime).abs() < 1e-10, "{sim:?} vs {}", out.q_prime);
        assert!(sim.swap_remainder_min_choi > -1e-10);
        assert!(sim.refresh_min_choi > -1e-10);
        assert!(sim.branch_min_eig > -1e-10 && sim.rest_min_eig > -1e-10);
    }

    #[test]
    fn restart_noiseless_cases() {
        let pure = restart_fidelity_sim(3, 0.0, 0.1, 0.1, 1.0, 3).unwrap();
        assert!(pure.fidelity.iter().all(|f| (f - 1.0).abs() < 1e-12));
        let weak = restart_fidelity_sim(3, 0.0, 0.1, 0.1, 0.2, 2).unwrap();
        assert!(weak.fidelity.iter().all(|f| (f - (1.0 + 0.296) / 2.0).abs() < 1e-12), "{weak:?}");
    }
}
