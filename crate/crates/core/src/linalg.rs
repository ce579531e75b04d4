//! Dense complex linear algebra for small Hilbert spaces (dim <= 64).
//!
//! Everything here is double precision and allocation-per-op; the dimensions
//! in play (up to 2^5 or 2^6) make that the right trade.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};

pub const I1: Complex64 = Complex64::new(0.0, 1.0);

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexOperator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { dim, entries: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        assert_eq!(self.dim, psi.dim());
        let mut amps = vec![Complex64::new(0.0, 0.0); self.dim];
        for i in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.dim {
                acc += self[(i, j)] * psi.amplitudes()[j];
            }
            amps[i] = acc;
        }
        StateVector::new(amps)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.entries {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a += b;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in i..self.dim {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = self.dagger().matmul(self);
        prod.max_abs_diff(&Self::identity(self.dim)) <= tol
    }
}

impl std::ops::Index<(usize, usize)> for ComplexOperator {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexOperator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

/// Normalized complex column vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        assert!(!amplitudes.is_empty());
        Self { amplitudes }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: amps }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        assert!(n > 0.0);
        Self { amplitudes: self.amplitudes.iter().map(|a| a / n).collect() }
    }

    /// Outer product |psi><psi|.
    pub fn projector(&self) -> ComplexOperator {
        let d = self.dim();
        let mut m = ComplexOperator::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn from_index(i: usize) -> Pauli {
        Pauli::ALL[i]
    }
}

pub fn pauli(which: Pauli) -> ComplexOperator {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    match which {
        Pauli::I => ComplexOperator::identity(2),
        Pauli::X => ComplexOperator::from_rows(&[&[o, one], &[one, o]]),
        Pauli::Y => ComplexOperator::from_rows(&[&[o, -I1], &[I1, o]]),
        Pauli::Z => ComplexOperator::from_rows(&[&[one, o], &[o, -one]]),
    }
}

pub fn kron(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    let (da, db) = (a.dim(), b.dim());
    let mut out = ComplexOperator::zeros(da * db);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            if aij.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product over a list of factors, left to right.
pub fn kron_all(factors: &[&ComplexOperator]) -> ComplexOperator {
    assert!(!factors.is_empty());
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron(&acc, f);
    }
    acc
}

const JACOBI_OFFDIAG_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues sorted ascending and the matching orthonormal
/// eigenvector columns. The sweep order is fixed, so degenerate subspaces
/// resolve the same way on every run.
pub fn eig_hermitian(h: &ComplexOperator) -> Result<(Vec<f64>, ComplexOperator)> {
    let tol = 1e-10;
    if !h.is_hermitian(tol) {
        let dev = h.max_abs_diff(&h.dagger());
        return Err(QctrlError::NotHermitian { max_dev: dev, tol });
    }
    let d = h.dim();
    let mut a = h.clone();
    // Symmetrize exactly so rounding in the input cannot bias the sweeps.
    for i in 0..d {
        for j in 0..d {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let mut v = ComplexOperator::identity(d);

    let off = |a: &ComplexOperator| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let scale = h.frobenius_norm().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_OFFDIAG_TOL * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::EPSILON * scale {
                    continue;
                }
                // Phase factor turning the (p,q) block real symmetric.
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Essential 2x2 unitary: diag(1, phase^*) composed with the real
                // Jacobi rotation that annihilates the now-real off-diagonal.
                let upp = Complex64::new(c, 0.0);
                let upq = Complex64::new(s, 0.0);
                let uqp = phase.conj() * -s;
                let uqq = phase.conj() * c;
                // A <- A * U
                for i in 0..d {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * upp + aiq * uqp;
                    a[(i, q)] = aip * upq + aiq * uqq;
                }
                // A <- U^dagger * A
                for j in 0..d {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = upp.conj() * apj + uqp.conj() * aqj;
                    a[(q, j)] = upq.conj() * apj + uqq.conj() * aqj;
                }
                // V <- V * U
                for i in 0..d {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * upp + viq * uqp;
                    v[(i, q)] = vip * upq + viq * uqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    let evals: Vec<f64> = (0..d).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap().then(i.cmp(&j)));
    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut sorted_vecs = ComplexOperator::zeros(d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..d {
            sorted_vecs[(i, new_col)] = v[(i, old_col)];
        }
    }
    Ok((sorted_vals, sorted_vecs))
}

/// e^{-i*scale*H} for Hermitian H, via eigendecomposition.
pub fn propagator(h: &ComplexOperator, scale: f64) -> Result<ComplexOperator> {
    let (evals, vecs) = eig_hermitian(h)?;
    let d = h.dim();
    let mut out = ComplexOperator::zeros(d);
    // V * diag(e^{-i*scale*lambda}) * V^dagger
    for i in 0..d {
        for j in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                let phase = Complex64::from_polar(1.0, -scale * evals[k]);
                acc += vecs[(i, k)] * phase * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Partial trace over the first (system) tensor factor.
pub fn partial_trace_system(
    u: &ComplexOperator,
    d_s: usize,
    d_b: usize,
) -> Result<ComplexOperator> {
    if u.dim() != d_s * d_b {
        return Err(QctrlError::DimensionMismatch { expected: d_s * d_b, got: u.dim() });
    }
    let mut out = ComplexOperator::zeros(d_b);
    for k in 0..d_b {
        for l in 0..d_b {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d_s {
                acc += u[(i * d_b + k, i * d_b + l)];
            }
            out[(k, l)] = acc;
        }
    }
    Ok(out)
}

/// Nuclear norm: sum of singular values, via the spectrum of M^dagger M.
pub fn trace_norm(m: &ComplexOperator) -> f64 {
    let gram = m.dagger().matmul(m);
    let (evals, _) = eig_hermitian(&gram).expect("gram matrix is Hermitian by construction");
    evals.iter().map(|&l| l.max(0.0).sqrt()).sum()
}

/// <a, b>, conjugate-linear in `a`.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(QctrlError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Re tr(rho_star^dagger rho).
pub fn overlap_density(rho_star: &ComplexOperator, rho: &ComplexOperator) -> Result<f64> {
    if rho_star.dim() != rho.dim() {
        return Err(QctrlError::DimensionMismatch { expected: rho_star.dim(), got: rho.dim() });
    }
    Ok(rho_star.dagger().matmul(rho).trace().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_abs_diff_eq;

    fn random_hermitian(dim: usize, seed: u64) -> ComplexOperator {
        let mut rng = SplitMix64::new(seed);
        let mut m = ComplexOperator::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(rng.next_symmetric(), 0.0);
            for j in (i + 1)..dim {
                let v = Complex64::new(rng.next_symmetric(), rng.next_symmetric());
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    fn random_matrix(dim: usize, seed: u64) -> ComplexOperator {
        let mut rng = SplitMix64::new(seed);
        let mut m = ComplexOperator::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = Complex64::new(rng.next_symmetric(), rng.next_symmetric());
            }
        }
        m
    }

    /// Truncated Taylor series of e^{-i*scale*H}, independent of the
    /// eigendecomposition path.
    fn taylor_propagator(h: &ComplexOperator, scale: f64, terms: usize) -> ComplexOperator {
        let d = h.dim();
        let mut acc = ComplexOperator::identity(d);
        let mut term = ComplexOperator::identity(d);
        for k in 1..=terms {
            term = term.matmul(h).scale(-I1 * scale / k as f64);
            acc = acc.add(&term);
        }
        acc
    }

    #[test]
    fn kron_identity() {
        let i2 = ComplexOperator::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexOperator::identity(4));
    }

    #[test]
    fn kron_matches_index_formula() {
        let a = pauli(Pauli::X);
        let b = pauli(Pauli::Z);
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    for m in 0..2 {
                        assert_eq!(k[(i * 2 + l, j * 2 + m)], a[(i, j)] * b[(l, m)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_trace_multiplicative() {
        let a = random_matrix(3, 7);
        let b = random_matrix(3, 8);
        let lhs = kron(&a, &b).trace();
        let rhs = a.trace() * b.trace();
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-12);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-12);
    }

    #[test]
    fn pauli_definitions() {
        let z = pauli(Pauli::Z);
        assert_eq!(z[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(z[(1, 1)], Complex64::new(-1.0, 0.0));
        let x = pauli(Pauli::X);
        assert_eq!(x.matmul(&x), ComplexOperator::identity(2));
        let xy = x.matmul(&pauli(Pauli::Y));
        assert!(xy.max_abs_diff(&z.scale(I1)) < 1e-15);
    }

    #[test]
    fn eig_diagonal() {
        let mut h = ComplexOperator::zeros(3);
        h[(0, 0)] = Complex64::new(3.0, 0.0);
        h[(1, 1)] = Complex64::new(1.0, 0.0);
        h[(2, 2)] = Complex64::new(2.0, 0.0);
        let (vals, _) = eig_hermitian(&h).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_sigma_x() {
        let (vals, vecs) = eig_hermitian(&pauli(Pauli::X)).unwrap();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        // Eigenvectors are (1, -1)/sqrt(2) and (1, 1)/sqrt(2) up to phase.
        for col in 0..2 {
            let ratio = vecs[(1, col)] / vecs[(0, col)];
            let expected = if col == 0 { -1.0 } else { 1.0 };
            assert_abs_diff_eq!(ratio.re, expected, epsilon = 1e-9);
            assert_abs_diff_eq!(ratio.im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn eig_reconstruction() {
        for seed in [1u64, 2, 3] {
            let h = random_hermitian(8, seed);
            let (vals, vecs) = eig_hermitian(&h).unwrap();
            let mut recon = ComplexOperator::zeros(8);
            for i in 0..8 {
                for j in 0..8 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..8 {
                        acc += vecs[(i, k)] * vals[k] * vecs[(j, k)].conj();
                    }
                    recon[(i, j)] = acc;
                }
            }
            assert!(recon.max_abs_diff(&h) < 1e-9, "seed {seed}");
            assert!(vecs.is_unitary(1e-9));
            // Residual check H v = lambda v.
            for k in 0..8 {
                for i in 0..8 {
                    let mut hv = Complex64::new(0.0, 0.0);
                    for j in 0..8 {
                        hv += h[(i, j)] * vecs[(j, k)];
                    }
                    assert!((hv - vals[k] * vecs[(i, k)]).norm() < 1e-9 * h.frobenius_norm());
                }
            }
        }
    }

    #[test]
    fn eig_reconstruction_dim_32() {
        let h = random_hermitian(32, 99);
        let (vals, vecs) = eig_hermitian(&h).unwrap();
        let mut recon = ComplexOperator::zeros(32);
        for i in 0..32 {
            for j in 0..32 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..32 {
                    acc += vecs[(i, k)] * vals[k] * vecs[(j, k)].conj();
                }
                recon[(i, j)] = acc;
            }
        }
        assert!(recon.max_abs_diff(&h) < 1e-9);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = random_matrix(3, 5);
        assert!(matches!(eig_hermitian(&m), Err(QctrlError::NotHermitian { .. })));
    }

    #[test]
    fn propagator_zero_generator() {
        let h = ComplexOperator::zeros(4);
        let u = propagator(&h, 0.002).unwrap();
        assert!(u.max_abs_diff(&ComplexOperator::identity(4)) < 1e-12);
    }

    #[test]
    fn propagator_sigma_z() {
        let u = propagator(&pauli(Pauli::Z), std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u[(0, 0)] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((u[(1, 1)] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!(u[(0, 1)].norm() < 1e-12 && u[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn propagator_matches_taylor_series() {
        let h = random_hermitian(4, 11);
        let u = propagator(&h, 0.3).unwrap();
        let series = taylor_propagator(&h, 0.3, 40);
        assert!(u.max_abs_diff(&series) < 1e-9);
        assert!(u.is_unitary(1e-9));
        // Commutes with the generator.
        let hu = h.matmul(&u);
        let uh = u.matmul(&h);
        assert!(hu.max_abs_diff(&uh) < 1e-8);
    }

    #[test]
    fn partial_trace_identity() {
        let u = ComplexOperator::identity(8);
        let r = partial_trace_system(&u, 2, 4).unwrap();
        assert!(r.max_abs_diff(&ComplexOperator::identity(4).scale(2.0.into())) < 1e-12);
    }

    #[test]
    fn partial_trace_product_rule() {
        let a = random_matrix(2, 21);
        let b = random_matrix(4, 22);
        let r = partial_trace_system(&kron(&a, &b), 2, 4).unwrap();
        let expected = b.scale(a.trace());
        assert!(r.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn partial_trace_matches_double_loop() {
        let u = random_matrix(8, 23);
        let r = partial_trace_system(&u, 2, 4).unwrap();
        for k in 0..4 {
            for l in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    acc += u[(i * 4 + k, i * 4 + l)];
                }
                assert!((r[(k, l)] - acc).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_linearity() {
        let a = random_matrix(8, 31);
        let b = random_matrix(8, 32);
        let combo = a.scale(Complex64::new(0.3, 0.1)).add(&b.scale(Complex64::new(-1.2, 0.4)));
        let lhs = partial_trace_system(&combo, 2, 4).unwrap();
        let rhs = partial_trace_system(&a, 2, 4)
            .unwrap()
            .scale(Complex64::new(0.3, 0.1))
            .add(&partial_trace_system(&b, 2, 4).unwrap().scale(Complex64::new(-1.2, 0.4)));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_dimension_check() {
        let u = ComplexOperator::identity(6);
        assert!(matches!(
            partial_trace_system(&u, 2, 4),
            Err(QctrlError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trace_norm_cases() {
        assert_abs_diff_eq!(trace_norm(&ComplexOperator::identity(5)), 5.0, epsilon = 1e-10);
        let mut d = ComplexOperator::zeros(2);
        d[(0, 0)] = Complex64::new(1.0, 0.0);
        d[(1, 1)] = Complex64::new(-2.0, 0.0);
        assert_abs_diff_eq!(trace_norm(&d), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_norm_of_unitary_is_dim() {
        let h = random_hermitian(6, 41);
        let u = propagator(&h, 0.7).unwrap();
        assert_abs_diff_eq!(trace_norm(&u), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn overlap_cases() {
        let psi = StateVector::new(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ]);
        let ov = overlap(&psi, &psi).unwrap();
        assert_abs_diff_eq!(ov.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ov.im, 0.0, epsilon = 1e-12);
        let e0 = StateVector::basis(2, 0);
        let e1 = StateVector::basis(2, 1);
        assert!(overlap(&e0, &e1).unwrap().norm() < 1e-15);
    }

    #[test]
    fn overlap_density_outer_products() {
        let mut rng = SplitMix64::new(55);
        for _ in 0..5 {
            let psi = StateVector::new(
                (0..4)
                    .map(|_| Complex64::new(rng.next_symmetric(), rng.next_symmetric()))
                    .collect(),
            )
            .normalized();
            let phi = StateVector::new(
                (0..4)
                    .map(|_| Complex64::new(rng.next_symmetric(), rng.next_symmetric()))
                    .collect(),
            )
            .normalized();
            let s = overlap_density(&psi.projector(), &phi.projector()).unwrap();
            let expected = overlap(&psi, &phi).unwrap().norm_sqr();
            assert_abs_diff_eq!(s, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn norm_preserved_by_propagator() {
        let h = random_hermitian(8, 61);
        let u = propagator(&h, 0.2).unwrap();
        let mut rng = SplitMix64::new(62);
        let psi = StateVector::new(
            (0..8)
                .map(|_| Complex64::new(rng.next_symmetric(), rng.next_symmetric()))
                .collect(),
        )
        .normalized();
        assert_abs_diff_eq!(u.apply(&psi).norm(), 1.0, epsilon = 1e-10);
    }
}
