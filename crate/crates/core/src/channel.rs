//! Operators, superoperators, Lindblad terms and entanglement-breaking channels.
//!
//! Conventions: superoperators act on column-stacked vectorized operators, and
//! the Choi matrix is unnormalized, `C = sum_ij S(E_ij) ⊗ E_ij`, so a channel
//! on `d`-dimensional operators has a Choi matrix of trace `d`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::linalg::{self, c, dagger, kron, CMat, C64, ONE, ZERO};

/// Tolerance for eigenvalue floors in complete-positivity checks.
pub const CP_TOL: f64 = 1e-10;

/// A square operator on `k >= 1` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::config::MatrixRepr", into = "crate::config::MatrixRepr")]
pub struct DenseOperator {
    mat: CMat,
}

impl DenseOperator {
    pub fn new(mat: CMat) -> Result<Self> {
        let (r, cols) = mat.shape();
        if r != cols || r < 2 || !r.is_power_of_two() {
            return Err(SimError::InvalidOperator(format!(
                "operator must be square with power-of-two dimension >= 2, got {r}x{cols}"
            )));
        }
        if !linalg::is_finite(&mat) {
            return Err(SimError::InvalidOperator("non-finite entries".into()));
        }
        Ok(Self { mat })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mat = CMat::from_fn(n, rows.first().map_or(0, |r| r.len()), |i, j| c(rows[i][j], 0.0));
        Self::new(mat)
    }

    pub fn identity(qubits: usize) -> Self {
        let d = 1usize << qubits;
        Self { mat: CMat::identity(d, d) }
    }

    /// `|v><v|` for a normalized copy of `v`.
    pub fn projector(v: &[C64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SimError::InvalidOperator("zero vector".into()));
        }
        let d = v.len();
        Self::new(CMat::from_fn(d, d, |i, j| v[i] * v[j].conj() / (norm * norm)))
    }

    pub fn ket0() -> Self {
        Self::projector(&[ONE, ZERO]).unwrap()
    }

    pub fn ket1() -> Self {
        Self::projector(&[ZERO, ONE]).unwrap()
    }

    pub fn plus() -> Self {
        Self::projector(&[ONE, ONE]).unwrap()
    }

    pub fn minus() -> Self {
        Self::projector(&[ONE, -ONE]).unwrap()
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1usize << qubits;
        Self { mat: CMat::identity(d, d).unscale(d as f64) }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn pauli_y() -> Self {
        Self::new(CMat::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    /// Two-qubit SWAP.
    pub fn swap() -> Self {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { mat: kron(&self.mat, &other.mat) }
    }

    pub fn scale(&self, x: f64) -> Self {
        Self { mat: self.mat.scale(x) }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::is_hermitian(&self.mat, tol)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.mat)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol.max(1e-12)) && self.eigenvalues()[0] >= -tol
    }

    /// Hermitian, PSD and unit trace within `tol`.
    pub fn is_density_matrix(&self, tol: f64) -> bool {
        self.is_psd(tol) && (self.trace() - ONE).norm() <= tol
    }
}

/// Dense superoperator on `support_size` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    support_size: usize,
    matrix: CMat,
}

impl Superoperator {
    pub fn new(support_size: usize, matrix: CMat) -> Result<Self> {
        let d2 = 1usize << (2 * support_size);
        if support_size == 0 || matrix.shape() != (d2, d2) {
            return Err(SimError::DimensionMismatch(format!(
                "superoperator on {support_size} qubits must be {d2}x{d2}, got {:?}",
                matrix.shape()
            )));
        }
        Ok(Self { support_size, matrix })
    }

    pub fn identity(support_size: usize) -> Self {
        let d2 = 1usize << (2 * support_size);
        Self { support_size, matrix: CMat::identity(d2, d2) }
    }

    pub fn zero(support_size: usize) -> Self {
        let d2 = 1usize << (2 * support_size);
        Self { support_size, matrix: CMat::zeros(d2, d2) }
    }

    /// Conjugation by an operator, `rho -> A rho A^dagger`.
    pub fn conjugation(a: &DenseOperator) -> Self {
        let m = a.matrix();
        Self { support_size: a.qubits(), matrix: kron(&m.map(|z| z.conj()), m) }
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn dim(&self) -> usize {
        1 << self.support_size
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        if rho.dim() != self.dim() {
            return Err(SimError::DimensionMismatch(format!(
                "superoperator on dimension {} applied to dimension {}",
                self.dim(),
                rho.dim()
            )));
        }
        let v = CMat::from_column_slice(self.dim() * self.dim(), 1, rho.matrix().as_slice());
        let out = &self.matrix * v;
        DenseOperator::new(CMat::from_column_slice(self.dim(), self.dim(), out.as_slice()))
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { support_size: self.support_size, matrix: &self.matrix * &other.matrix })
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            support_size: self.support_size,
            matrix: self.matrix.scale(a) + other.matrix.scale(b),
        })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { support_size: self.support_size, matrix: self.matrix.scale(a) }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.support_size != other.support_size {
            return Err(SimError::DimensionMismatch(format!(
                "superoperators on {} and {} qubits",
                self.support_size, other.support_size
            )));
        }
        Ok(())
    }
}

/// `C[(p d + i), (q d + j)] = S(E_ij)[p, q]`.
pub fn choi_matrix(s: &Superoperator) -> DenseOperator {
    let d = s.dim();
    let m = s.matrix();
    let choi = CMat::from_fn(d * d, d * d, |row, col| {
        let (p, i) = (row / d, row % d);
        let (q, j) = (col / d, col % d);
        m[(p + d * q, i + d * j)]
    });
    DenseOperator { mat: choi }
}

pub fn min_choi_eigenvalue(s: &Superoperator) -> f64 {
    choi_matrix(s).eigenvalues()[0]
}

/// Largest eigenvalue magnitude of the Choi matrix.
pub fn choi_spectral_radius(s: &Superoperator) -> f64 {
    choi_matrix(s).eigenvalues().iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// True iff the Choi matrix is PSD and the map is trace preserving, both within `tol`.
pub fn is_cptp(s: &Superoperator, tol: f64) -> bool {
    let d = s.dim();
    let m = s.matrix();
    for j in 0..d {
        for i in 0..d {
            let tr: C64 = (0..d).map(|p| m[(p + d * p, i + d * j)]).sum();
            let expect = if i == j { ONE } else { ZERO };
            if (tr - expect).norm() > tol {
                return false;
            }
        }
    }
    let choi = choi_matrix(s);
    choi.is_hermitian(tol.max(1e-12)) && choi.eigenvalues()[0] >= -tol
}

/// A local Lindblad term `L(rho) = -i[H, rho] + sum_k (L_k rho L_k^† - {L_k^† L_k, rho}/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladTerm {
    /// Lattice site indices; the first listed site is the most significant tensor factor.
    pub support: Vec<usize>,
    #[serde(default)]
    pub hamiltonian: Option<DenseOperator>,
    #[serde(default)]
    pub jump_ops: Vec<DenseOperator>,
}

impl LindbladTerm {
    pub fn new(
        support: Vec<usize>,
        hamiltonian: Option<DenseOperator>,
        jump_ops: Vec<DenseOperator>,
    ) -> Result<Self> {
        let term = Self { support, hamiltonian, jump_ops };
        term.validate()?;
        Ok(term)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.support.len();
        if k == 0 || k > 6 {
            return Err(SimError::InvalidModel(format!("term support of size {k} (allowed 1..=6)")));
        }
        for (i, s) in self.support.iter().enumerate() {
            if self.support[..i].contains(s) {
                return Err(SimError::InvalidModel(format!("repeated site {s} in term support")));
            }
        }
        let ops = self.hamiltonian.iter().chain(self.jump_ops.iter());
        for op in ops {
            if op.qubits() != k {
                return Err(SimError::DimensionMismatch(format!(
                    "operator on {} qubits for a {k}-site term",
                    op.qubits()
                )));
            }
        }
        if let Some(h) = &self.hamiltonian {
            if !h.is_hermitian(1e-10) {
                return Err(SimError::InvalidOperator("Hamiltonian is not Hermitian".into()));
            }
        }
        Ok(())
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn is_zero(&self) -> bool {
        let zero = |op: &DenseOperator| linalg::max_abs(op.matrix()) == 0.0;
        self.hamiltonian.as_ref().is_none_or(zero) && self.jump_ops.iter().all(zero)
    }

    /// The generator as a superoperator on the term's support.
    pub fn generator(&self) -> Superoperator {
        let k = self.support_size();
        let d = 1usize << k;
        let id = CMat::identity(d, d);
        let mut g = CMat::zeros(d * d, d * d);
        if let Some(h) = &self.hamiltonian {
            let h = h.matrix();
            g += (kron(&id, h) - kron(&h.transpose(), &id)) * c(0.0, -1.0);
        }
        for l in &self.jump_ops {
            let l = l.matrix();
            let ldl = dagger(l) * l;
            g += kron(&l.map(|z| z.conj()), l);
            g -= kron(&id, &ldl).scale(0.5);
            g -= kron(&ldl.transpose(), &id).scale(0.5);
        }
        Superoperator { support_size: k, matrix: g }
    }

    /// The same term with its generator multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            support: self.support.clone(),
            hamiltonian: self.hamiltonian.as_ref().map(|h| h.scale(factor)),
            jump_ops: self.jump_ops.iter().map(|l| l.scale(factor.sqrt())).collect(),
        }
    }

    /// The same term rescaled so its interaction strength equals `strength`.
    pub fn normalized(&self, strength: f64) -> Self {
        let g = choi_spectral_radius(&self.generator());
        if g == 0.0 {
            self.clone()
        } else {
            self.scaled(strength / g)
        }
    }

    pub fn with_support(&self, support: Vec<usize>) -> Self {
        Self { support, ..self.clone() }
    }
}

/// `g = max over terms of the largest-magnitude Choi eigenvalue of the generator`.
pub fn interaction_strength(terms: &[LindbladTerm]) -> Result<f64> {
    if terms.is_empty() {
        return Err(SimError::Empty("interaction strength of an empty term list".into()));
    }
    Ok(terms
        .iter()
        .map(|t| choi_spectral_radius(&t.generator()))
        .fold(0.0, f64::max))
}

/// Smallest `g >= 0` for which `Id + L/g` is completely positive, or `None`
/// when no finite `g` works (any term with a non-trivial Hamiltonian part
/// falls here, since the first-order map of a unitary is never CP).
///
/// Writes the Choi matrix of `L` in the basis `{Omega/sqrt(d), complement}` as
/// blocks `(c00, w; w^†, K)`; then `Id + L/g` is CP iff `K >= 0`, `w` lies in
/// the range of `K` and `g >= (w^† K^+ w - c00) / d`.
pub fn cp_threshold(term: &LindbladTerm) -> Option<f64> {
    let gen = term.generator();
    let d = gen.dim();
    let choi = choi_matrix(&gen).into_matrix();
    let scale = linalg::max_abs(&choi);
    if scale == 0.0 {
        return Some(0.0);
    }
    let tol = 1e-9 * scale.max(1.0);
    // Orthonormal basis with the maximally entangled direction first.
    let n = d * d;
    let mut basis = CMat::zeros(n, n);
    for i in 0..d {
        basis[(i * d + i, 0)] = c(1.0 / (d as f64).sqrt(), 0.0);
    }
    let mut filled = 1;
    for e in 0..n {
        if filled == n {
            break;
        }
        let mut v = CMat::zeros(n, 1);
        v[(e, 0)] = ONE;
        for col in 0..filled {
            let b = basis.column(col).into_owned();
            let proj = (b.adjoint() * &v)[(0, 0)];
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.set_column(filled, &v.unscale(norm).column(0));
            filled += 1;
        }
    }
    let rotated = basis.adjoint() * &choi * &basis;
    let c00 = rotated[(0, 0)].re;
    let w = rotated.view((1, 0), (n - 1, 1)).into_owned();
    let k = rotated.view((1, 1), (n - 1, n - 1)).into_owned();
    let (vals, vecs) = linalg::hermitian_eigen(&k);
    if vals[0] < -tol {
        return None;
    }
    let mut quad = 0.0;
    for (j, &lam) in vals.iter().enumerate() {
        let overlap = (vecs.column(j).adjoint() * &w)[(0, 0)].norm_sqr();
        if lam <= tol {
            if overlap > tol * tol {
                return None;
            }
        } else {
            quad += overlap / lam;
        }
    }
    Some(((quad - c00) / d as f64).max(0.0))
}

/// Probability/channel pair of the identity-vs-channel split of a short-time step.
#[derive(Debug, Clone)]
pub struct ConvexSplit {
    pub p_fire: f64,
    pub channel: Superoperator,
}

/// Splits `Id + tau L` as `(1 - g tau) Id + g tau (Id + L/g)`; errors when the
/// fired map `Id + L/g` is not completely positive.
pub fn convex_split(term: &LindbladTerm, g: f64, tau: f64) -> Result<ConvexSplit> {
    let split = first_order_split(term, g, tau)?;
    let min_eig = min_choi_eigenvalue(&split.channel);
    if min_eig < -CP_TOL {
        return Err(SimError::NotCompletelyPositive { g, min_eigenvalue: min_eig });
    }
    Ok(split)
}

/// As [`convex_split`] but without the complete-positivity check. The fired map
/// is then only Hermiticity- and trace-preserving.
pub fn first_order_split(term: &LindbladTerm, g: f64, tau: f64) -> Result<ConvexSplit> {
    if !(g > 0.0) || !(tau >= 0.0) || g * tau >= 1.0 {
        return Err(SimError::Infeasible(format!(
            "convex split needs g > 0 and 0 <= g*tau < 1 (g = {g}, tau = {tau})"
        )));
    }
    let k = term.support_size();
    let channel = Superoperator::identity(k).combine(1.0, &term.generator(), 1.0 / g)?;
    Ok(ConvexSplit { p_fire: g * tau, channel })
}

/// `exp(tau L)` for a single term.
pub fn exact_exponential(term: &LindbladTerm, tau: f64) -> Result<Superoperator> {
    if !(tau >= 0.0) {
        return Err(SimError::Infeasible(format!("negative evolution time {tau}")));
    }
    let gen = term.generator();
    let m = linalg::expm(&gen.matrix().scale(tau))?;
    Superoperator::new(term.support_size(), m)
}

/// Measure-and-prepare channel `N(rho) = sum_i sigma_i Tr(E_i rho)` on one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementBreakingChannel {
    pub povm: Vec<DenseOperator>,
    pub states: Vec<DenseOperator>,
}

impl EntanglementBreakingChannel {
    pub fn new(povm: Vec<DenseOperator>, states: Vec<DenseOperator>) -> Result<Self> {
        let ch = Self { povm, states };
        ch.validate(1e-9)?;
        Ok(ch)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.povm.is_empty() || self.povm.len() != self.states.len() {
            return Err(SimError::InvalidPovm(format!(
                "{} POVM elements for {} states",
                self.povm.len(),
                self.states.len()
            )));
        }
        let mut total = CMat::zeros(2, 2);
        for (e, s) in self.povm.iter().zip(&self.states) {
            if e.dim() != 2 || s.dim() != 2 {
                return Err(SimError::InvalidPovm("elements must be single-qubit".into()));
            }
            if !e.is_psd(tol) {
                return Err(SimError::InvalidPovm("POVM element is not PSD".into()));
            }
            if !s.is_density_matrix(tol) {
                return Err(SimError::InvalidPovm("replacement state is not a density matrix".into()));
            }
            total += e.matrix();
        }
        if linalg::max_abs(&(total - CMat::identity(2, 2))) > tol {
            return Err(SimError::InvalidPovm("elements do not sum to the identity".into()));
        }
        Ok(())
    }

    /// Measure in the computational basis and re-prepare the observed state.
    pub fn z_measure() -> Self {
        let (p0, p1) = (DenseOperator::ket0(), DenseOperator::ket1());
        Self { povm: vec![p0.clone(), p1.clone()], states: vec![p0, p1] }
    }

    pub fn x_measure() -> Self {
        let (p, m) = (DenseOperator::plus(), DenseOperator::minus());
        Self { povm: vec![p.clone(), m.clone()], states: vec![p, m] }
    }

    /// Replace every state by `I/2`.
    pub fn depolarizing() -> Self {
        Self::replacement(DenseOperator::maximally_mixed(1))
    }

    /// Replace every state by `sigma`.
    pub fn replacement(sigma: DenseOperator) -> Self {
        Self { povm: vec![DenseOperator::identity(1)], states: vec![sigma] }
    }

    pub fn superoperator(&self) -> Superoperator {
        let mut m = CMat::zeros(4, 4);
        for (e, s) in self.povm.iter().zip(&self.states) {
            let sv = s.matrix().as_slice();
            let e = e.matrix();
            for col in 0..4 {
                let (a, b) = (col % 2, col / 2);
                let ev = e[(b, a)];
                for (row, sx) in sv.iter().enumerate() {
                    m[(row, col)] += sx * ev;
                }
            }
        }
        Superoperator { support_size: 1, matrix: m }
    }

    /// Outcome probabilities `Tr(E_i rho)`; errors when they do not form a
    /// distribution within tolerance.
    pub fn outcome_probabilities(&self, rho: &CMat) -> Result<Vec<f64>> {
        if rho.shape() != (2, 2) {
            return Err(SimError::DimensionMismatch("POVM applied to a non-qubit state".into()));
        }
        let probs: Vec<f64> = self
            .povm
            .iter()
            .map(|e| linalg::trace(&(e.matrix() * rho)).re)
            .collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-8 || probs.iter().any(|&p| p < -1e-9) {
            return Err(SimError::InvalidPovm(format!(
                "outcome probabilities {probs:?} do not form a distribution"
            )));
        }
        Ok(probs.iter().map(|p| p.max(0.0) / total).collect())
    }
}

/// Samples the measurement half of the measure-and-prepare form: returns the
/// outcome index and the state it prepares.
pub fn eb_apply_as_measurement<R: Rng + ?Sized>(
    ch: &EntanglementBreakingChannel,
    rho_marginal: &DenseOperator,
    rng: &mut R,
) -> Result<(usize, DenseOperator)> {
    let probs = ch.outcome_probabilities(rho_marginal.matrix())?;
    let k = sample_index(&probs, rng);
    Ok((k, ch.states[k].clone()))
}

/// Inverse-CDF draw from a normalized probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dephasing() -> LindbladTerm {
        // L(rho) = Z rho Z - rho
        LindbladTerm::new(vec![0], None, vec![DenseOperator::pauli_z()]).unwrap()
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    fn assert_spectrum(actual: Vec<f64>, expect: &[f64]) {
        let a = sorted(actual);
        let e = sorted(expect.to_vec());
        for (x, y) in a.iter().zip(&e) {
            assert!((x - y).abs() < 1e-10, "spectrum {a:?} != {e:?}");
        }
    }

    #[test]
    fn dephasing_generator_matches_definition() {
        let rho = DenseOperator::plus();
        let out = dephasing().generator().apply(&rho).unwrap();
        let z = DenseOperator::pauli_z();
        let expect = z.matrix() * rho.matrix() * z.matrix() - rho.matrix();
        assert!(linalg::max_abs(&(out.matrix() - expect)) < 1e-14);
    }

    #[test]
    fn choi_of_identity_is_unnormalized_bell_projector() {
        let choi = choi_matrix(&Superoperator::identity(1));
        assert_spectrum(choi.eigenvalues(), &[2.0, 0.0, 0.0, 0.0]);
        assert!((choi.trace().re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn choi_of_zero_is_zero() {
        let choi = choi_matrix(&Superoperator::zero(2));
        assert_eq!(linalg::max_abs(choi.matrix()), 0.0);
    }

    #[test]
    fn choi_of_dephasing_generator() {
        assert_spectrum(choi_matrix(&dephasing().generator()).eigenvalues(), &[2.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn interaction_strength_semantics() {
        assert!((interaction_strength(&[dephasing()]).unwrap() - 2.0).abs() < 1e-12);
        assert!((interaction_strength(&[dephasing(), dephasing()]).unwrap() - 2.0).abs() < 1e-12);
        let zero = LindbladTerm::new(vec![0], None, vec![]).unwrap();
        assert_eq!(interaction_strength(&[zero]).unwrap(), 0.0);
        assert!(matches!(interaction_strength(&[]), Err(SimError::Empty(_))));
    }

    #[test]
    fn convex_split_of_dephasing() {
        let split = convex_split(&dephasing(), 2.0, 0.1).unwrap();
        assert!((split.p_fire - 0.2).abs() < 1e-15);
        assert!(is_cptp(&split.channel, CP_TOL));
        assert!(min_choi_eigenvalue(&split.channel) >= -1e-10);
    }

    #[test]
    fn dephasing_cp_threshold_is_one() {
        // Id + L/g = (1 - 1/g) Id + (1/g) Z.Z, a mixture for every g >= 1.
        let t = cp_threshold(&dephasing()).unwrap();
        assert!((t - 1.0).abs() < 1e-9, "threshold {t}");
        assert!(convex_split(&dephasing(), 1.9, 0.1).is_ok());
        let err = convex_split(&dephasing(), 0.9, 0.1).unwrap_err();
        match err {
            SimError::NotCompletelyPositive { min_eigenvalue, .. } => {
                // 2 (1 - 1/0.9)
                assert!((min_eigenvalue - 2.0 * (1.0 - 1.0 / 0.9)).abs() < 1e-10)
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn hamiltonian_terms_have_no_cp_threshold() {
        let h = LindbladTerm::new(vec![0], Some(DenseOperator::pauli_x()), vec![]).unwrap();
        assert!(cp_threshold(&h).is_none());
        let g = interaction_strength(std::slice::from_ref(&h)).unwrap();
        for factor in [1.001, 10.0, 1e4] {
            assert!(matches!(
                convex_split(&h, factor * g, 1e-6),
                Err(SimError::NotCompletelyPositive { .. })
            ));
        }
    }

    #[test]
    fn amplitude_damping_has_no_cp_threshold() {
        // The first-order map keeps a -(1/4g^2) P1 . P1 remainder, so no g works.
        let lower = DenseOperator::new(CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])).unwrap();
        let term = LindbladTerm::new(vec![0], None, vec![lower]).unwrap();
        assert!(cp_threshold(&term).is_none());
        for g in [1.0, 10.0, 1e3] {
            let floor = min_choi_eigenvalue(&first_order_split(&term, g, 0.0).unwrap().channel);
            assert!(floor < 0.0, "g = {g}: {floor}");
        }
    }

    #[test]
    fn exchange_threshold_matches_choi_floor() {
        let term = LindbladTerm::new(vec![0, 1], None, vec![DenseOperator::swap()]).unwrap();
        let t = cp_threshold(&term).unwrap();
        assert!(t > 0.0);
        let at = |g: f64| min_choi_eigenvalue(&first_order_split(&term, g, 0.0).unwrap().channel);
        assert!(at(t * 1.01) >= -1e-10);
        assert!(at(t * 0.99) < -1e-10);
    }

    #[test]
    fn zero_generator_splits_to_identity() {
        let zero = LindbladTerm::new(vec![0, 1], None, vec![]).unwrap();
        let split = convex_split(&zero, 0.7, 0.5).unwrap();
        assert_eq!(split.channel, Superoperator::identity(2));
    }

    #[test]
    fn generator_is_not_a_channel() {
        let gen = dephasing().generator();
        // trace preservation of the flow holds (columns of L sum to zero on the diagonal),
        // but the Choi matrix has eigenvalue -2 so the check fails.
        assert!(!is_cptp(&gen, CP_TOL));
        assert!(is_cptp(&Superoperator::identity(1), CP_TOL));
        assert!(is_cptp(&EntanglementBreakingChannel::z_measure().superoperator(), CP_TOL));
    }

    #[test]
    fn exponential_limits() {
        assert_eq!(
            exact_exponential(&dephasing(), 0.0).unwrap(),
            Superoperator::identity(1)
        );
        let lower = DenseOperator::new(CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])).unwrap();
        let damping = LindbladTerm::new(vec![0], None, vec![lower]).unwrap();
        let ch = exact_exponential(&damping, 90.0).unwrap();
        assert!(is_cptp(&ch, 1e-10));
        for rho in [DenseOperator::ket1(), DenseOperator::plus(), DenseOperator::maximally_mixed(1)] {
            let out = ch.apply(&rho).unwrap();
            assert!(linalg::max_abs(&(out.matrix() - DenseOperator::ket0().matrix())) < 1e-12);
        }
    }

    #[test]
    fn dephasing_exponential_decays_coherence() {
        let tau = 0.5;
        let ch = exact_exponential(&dephasing(), tau).unwrap();
        assert!(is_cptp(&ch, 1e-10));
        let out = ch.apply(&DenseOperator::plus()).unwrap();
        // coherence obeys d/dt c = -2 c
        assert!((out.matrix()[(0, 1)].re - 0.5 * (-2.0 * tau).exp()).abs() < 1e-13);
        assert!((out.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn eb_superoperator_is_measure_and_prepare() {
        let ch = EntanglementBreakingChannel::z_measure();
        let out = ch.superoperator().apply(&DenseOperator::plus()).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - DenseOperator::maximally_mixed(1).matrix())) < 1e-15);
    }

    #[test]
    fn measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = EntanglementBreakingChannel::z_measure();
        for _ in 0..100 {
            let (k, s) = eb_apply_as_measurement(&ch, &DenseOperator::ket0(), &mut rng).unwrap();
            assert_eq!(k, 0);
            assert_eq!(s, DenseOperator::ket0());
        }
        let probs = ch.outcome_probabilities(DenseOperator::maximally_mixed(1).matrix()).unwrap();
        assert_eq!(probs, vec![0.5, 0.5]);

        let weighted = EntanglementBreakingChannel::new(
            vec![DenseOperator::identity(1).scale(0.7), DenseOperator::identity(1).scale(0.3)],
            vec![DenseOperator::ket0(), DenseOperator::ket1()],
        )
        .unwrap();
        let p = weighted.outcome_probabilities(DenseOperator::plus().matrix()).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn invalid_povm_is_rejected() {
        let bad = EntanglementBreakingChannel::new(
            vec![DenseOperator::ket0()],
            vec![DenseOperator::ket0()],
        );
        assert!(matches!(bad, Err(SimError::InvalidPovm(_))));
        let ch = EntanglementBreakingChannel::z_measure();
        let not_normalized = CMat::identity(2, 2);
        assert!(ch.outcome_probabilities(&not_normalized).is_err());
    }
}
