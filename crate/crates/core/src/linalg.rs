//! Dense complex linear algebra on qubit registers.
//!
//! Register convention: in an `n`-qubit register, qubit position `0` is the most
//! significant bit of a basis index. Density operators are vectorized by column
//! stacking, `vec(rho)[a + d*b] = rho[(a, b)]`, which coincides with nalgebra's
//! column-major storage. A superoperator acting on `k` qubits is a `4^k x 4^k`
//! matrix on that vectorization.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = x * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &CMat) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Eigen-decomposition of the Hermitian part of `m`; eigenvalues ascending with
/// matching eigenvector columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), m.ncols(), |r, j| eig.eigenvectors[(r, order[j])]);
    (vals, vecs)
}

/// Trace norm as the sum of singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    m.singular_values().iter().sum()
}

/// Index spreading table for a set of qubit positions inside an `n`-qubit register.
///
/// `spread[a]` places the bits of the local index `a` (local qubit 0 most
/// significant) onto the register positions in `positions`.
#[derive(Debug, Clone)]
pub struct Spread {
    pub table: Vec<usize>,
    pub mask: usize,
}

impl Spread {
    pub fn new(n: usize, positions: &[usize]) -> Self {
        let k = positions.len();
        let table: Vec<usize> = (0..1usize << k)
            .map(|a| {
                positions.iter().enumerate().fold(0usize, |acc, (j, &p)| {
                    acc | (((a >> (k - 1 - j)) & 1) << (n - 1 - p))
                })
            })
            .collect();
        let mask = *table.last().unwrap_or(&0);
        Self { table, mask }
    }

    /// Register indices whose bits on the spread positions are all zero.
    pub fn bases(&self, dim: usize) -> impl Iterator<Item = usize> + '_ {
        (0..dim).filter(move |i| i & self.mask == 0)
    }
}

fn check_positions(n: usize, positions: &[usize]) -> Result<()> {
    for (i, &p) in positions.iter().enumerate() {
        if p >= n || positions[..i].contains(&p) {
            return Err(SimError::DimensionMismatch(format!(
                "qubit positions {positions:?} invalid for a {n}-qubit register"
            )));
        }
    }
    Ok(())
}

/// Applies a `k`-qubit superoperator to the qubits at `positions` of an
/// `n`-qubit density operator, in place.
pub fn apply_local_superop(rho: &mut CMat, n: usize, positions: &[usize], s: &CMat) -> Result<()> {
    let dim = 1usize << n;
    let k = positions.len();
    let dk = 1usize << k;
    if rho.shape() != (dim, dim) || s.shape() != (dk * dk, dk * dk) {
        return Err(SimError::DimensionMismatch(format!(
            "superoperator {:?} on {k} of {n} qubits with state {:?}",
            s.shape(),
            rho.shape()
        )));
    }
    check_positions(n, positions)?;
    let spread = Spread::new(n, positions);
    let mut buf_in = vec![ZERO; dk * dk];
    let mut buf_out = vec![ZERO; dk * dk];
    let bases: Vec<usize> = spread.bases(dim).collect();
    for &c0 in &bases {
        for &r0 in &bases {
            for b in 0..dk {
                for a in 0..dk {
                    buf_in[a + dk * b] = rho[(r0 | spread.table[a], c0 | spread.table[b])];
                }
            }
            for (row, out) in buf_out.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (col, x) in buf_in.iter().enumerate() {
                    acc += s[(row, col)] * x;
                }
                *out = acc;
            }
            for b in 0..dk {
                for a in 0..dk {
                    rho[(r0 | spread.table[a], c0 | spread.table[b])] = buf_out[a + dk * b];
                }
            }
        }
    }
    Ok(())
}

/// Reduced density operator on the qubits at `keep` (in the given order).
pub fn partial_trace_keep(rho: &CMat, n: usize, keep: &[usize]) -> Result<CMat> {
    check_positions(n, keep)?;
    let traced: Vec<usize> = (0..n).filter(|p| !keep.contains(p)).collect();
    let sk = Spread::new(n, keep);
    let st = Spread::new(n, &traced);
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let mut out = CMat::zeros(dk, dk);
    for j in 0..dk {
        for i in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += rho[(sk.table[i] | st.table[t], sk.table[j] | st.table[t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Contracts the qubit at `pos` against a single-qubit operator:
/// returns `Tr_pos[(op ⊗ I) rho]` on the remaining `n - 1` qubits (order kept).
pub fn contract_qubit(rho: &CMat, n: usize, pos: usize, op: &CMat) -> Result<CMat> {
    if pos >= n || op.shape() != (2, 2) {
        return Err(SimError::DimensionMismatch(format!(
            "cannot contract position {pos} of {n} qubits"
        )));
    }
    let rest: Vec<usize> = (0..n).filter(|&p| p != pos).collect();
    let sr = Spread::new(n, &rest);
    let bit = 1usize << (n - 1 - pos);
    let dr = 1usize << rest.len();
    let mut out = CMat::zeros(dr, dr);
    for j in 0..dr {
        for i in 0..dr {
            let (r, cc) = (sr.table[i], sr.table[j]);
            let mut acc = ZERO;
            for a in 0..2 {
                for b in 0..2 {
                    let e = op[(b, a)];
                    if e != ZERO {
                        acc += e * rho[(r | (a * bit), cc | (b * bit))];
                    }
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Tensor product of a list of operators, first factor most significant.
pub fn kron_all<'a>(ops: impl IntoIterator<Item = &'a CMat>) -> CMat {
    ops.into_iter()
        .fold(CMat::from_element(1, 1, ONE), |acc, op| kron(&acc, op))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The squaring count is chosen so the scaled matrix has 1-norm at most 0.5,
/// and the series is summed until the last term is negligible against the
/// partial sum (well inside the `1e-12` relative target).
pub fn expm(a: &CMat) -> Result<CMat> {
    if !a.is_square() {
        return Err(SimError::DimensionMismatch("expm needs a square matrix".into()));
    }
    if !is_finite(a) {
        return Err(SimError::Numerical("non-finite entries in matrix exponential".into()));
    }
    let norm = norm1(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(0.5f64.powi(squarings as i32));
    let dim = a.nrows();
    let mut sum = CMat::identity(dim, dim);
    let mut term = CMat::identity(dim, dim);
    for k in 1..=40 {
        term = (&term * &scaled).unscale(k as f64);
        sum += &term;
        let tn = norm1(&term);
        if tn <= 1e-17 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    if !is_finite(&sum) {
        return Err(SimError::Numerical("matrix exponential overflowed".into()));
    }
    Ok(sum)
}

/// Action of `exp(t G)` on a density operator, where `G` is available only as a
/// linear map `apply`. `norm_bound` must upper-bound the induced 1-norm of `G`
/// on vectorized operators; it sets the number of substeps.
pub fn expm_action<F>(apply: F, rho: &CMat, t: f64, norm_bound: f64) -> Result<CMat>
where
    F: Fn(&CMat) -> Result<CMat>,
{
    let steps = ((t * norm_bound) / 0.5).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut state = rho.clone();
    for _ in 0..steps {
        let mut term = state.clone();
        let mut sum = state.clone();
        for k in 1..=60 {
            term = apply(&term)?.scale(h / k as f64);
            sum += &term;
            let tn = max_abs(&term);
            if tn <= 1e-17 * max_abs(&sum).max(1e-300) || tn == 0.0 {
                break;
            }
        }
        state = sum;
        if !is_finite(&state) {
            return Err(SimError::Numerical("non-finite state in exponential action".into()));
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn spread_places_bits_msb_first() {
        let s = Spread::new(3, &[2, 0]);
        // local index 0b10 -> position 2 set -> register bit 0
        assert_eq!(s.table, vec![0, 0b100, 0b001, 0b101]);
    }

    #[test]
    fn local_identity_superop_is_noop() {
        let mut rho = CMat::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        let before = rho.clone();
        apply_local_superop(&mut rho, 2, &[1], &CMat::identity(4, 4)).unwrap();
        assert_eq!(rho, before);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = CMat::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.4, 0.0), ZERO, ZERO, c(0.6, 0.0)]);
        let rho = kron(&a, &b);
        let ra = partial_trace_keep(&rho, 2, &[0]).unwrap();
        let rb = partial_trace_keep(&rho, 2, &[1]).unwrap();
        assert!(max_abs(&(ra - &a)) < 1e-14);
        assert!(max_abs(&(rb - &b)) < 1e-14);
        // reversed keep order permutes tensor factors
        let swapped = partial_trace_keep(&rho, 2, &[1, 0]).unwrap();
        assert!(max_abs(&(swapped - kron(&b, &a))) < 1e-14);
    }

    #[test]
    fn contract_with_identity_is_partial_trace() {
        let a = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.9, 0.0), ZERO, ZERO, c(0.1, 0.0)]);
        let rho = kron(&a, &b);
        let r = contract_qubit(&rho, 2, 0, &CMat::identity(2, 2)).unwrap();
        assert!(max_abs(&(r - &b)) < 1e-14);
    }

    #[test]
    fn expm_of_pauli_rotation() {
        let theta = 0.83;
        let gen = pauli_x().scale(theta) * c(0.0, -1.0);
        let u = expm(&gen).unwrap();
        let expect = CMat::identity(2, 2).scale(theta.cos()) + pauli_x() * c(0.0, -theta.sin());
        assert!(max_abs(&(u - expect)) < 1e-13);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let gen = CMat::from_row_slice(2, 2, &[c(-7.0, 0.0), ZERO, ZERO, c(3.0, 0.0)]);
        let e = expm(&gen).unwrap();
        assert!((e[(0, 0)].re - (-7.0f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)].re / 3.0f64.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expm_rejects_nan() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(expm(&m), Err(SimError::Numerical(_))));
    }

    #[test]
    fn trace_norm_of_hermitian_difference() {
        let m = CMat::from_row_slice(2, 2, &[c(0.25, 0.0), ZERO, ZERO, c(-0.25, 0.0)]);
        assert!((trace_norm(&m) - 0.5).abs() < 1e-14);
    }
}
