//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` column-major storage, so [`vec`] is a plain copy of
//! the backing slice. Every lift in [`crate::lift`] is written against this
//! column-stacking convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Shared numerical tolerances.
pub mod tol {
    /// Relative tolerance for the Hermitian check.
    pub const HERMITIAN_REL: f64 = 1e-12;
    /// Relative tolerance for eigen-reconstruction and orthonormality.
    pub const RECONSTRUCTION: f64 = 1e-10;
    /// Eigenvalues closer than this (relative to the spectral radius) are ties.
    pub const EIG_TIE_REL: f64 = 1e-12;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotHermitian { asymmetry: f64, scale: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kronecker product of {0}x{1} and {2}x{3} overflows usize")]
    SizeOverflow(usize, usize, usize, usize),
    #[error("empty matrix operand")]
    Empty,
    #[error("non-finite entry in matrix")]
    NonFinite,
    #[error("eigensolver did not converge")]
    NoConvergence,
}

/// Complex Hermitian matrix. Construction enforces the invariant and then
/// symmetrizes exactly, so downstream code sees `A == A^H` bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let n = m.nrows();
        let mut asymmetry: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if asymmetry > tol::HERMITIAN_REL * scale.max(f64::MIN_POSITIVE) && asymmetry > 0.0 {
            return Err(LinalgError::NotHermitian { asymmetry, scale });
        }
        Ok(Self::symmetrized(m))
    }

    /// Takes the Hermitian part `(m + m^H)/2` without validation.
    pub fn symmetrized(m: ComplexMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut h = h;
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
        }
        HermitianMatrix(h)
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(ComplexMatrix::identity(n, n))
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(d: &[f64]) -> Self {
        let v = ComplexVector::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0)));
        HermitianMatrix(ComplexMatrix::from_diagonal(&v))
    }

    /// `v v^H`.
    pub fn outer(v: &ComplexVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(&self.0 * Complex64::new(s, 0.0))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0 * Complex64::new(s, 0.0))
    }

    /// `Tr(self * other)`, real for Hermitian operands.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        // Tr(A B) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a * b.conj()).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Congruence `B^H self B`.
    pub fn congruence(&self, b: &ComplexMatrix) -> Self {
        Self::symmetrized(b.adjoint() * &self.0 * b)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if a.is_empty() || b.is_empty() {
        return Err(LinalgError::Empty);
    }
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let rows = ra.checked_mul(rb);
    let cols = ca.checked_mul(cb);
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some() => Ok(a.kronecker(b)),
        _ => Err(LinalgError::SizeOverflow(ra, ca, rb, cb)),
    }
}

/// Column-stacking vectorization.
pub fn vec(a: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &ComplexVector, rows: usize, cols: usize) -> Result<ComplexMatrix, LinalgError> {
    if v.len() != rows * cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "cannot reshape length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(ComplexMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn vector(&self, k: usize) -> ComplexVector {
        self.vectors.column(k).into_owned()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Hermitian eigendecomposition with descending eigenvalues.
///
/// Each eigenvector is phase-normalized so that its first entry of largest
/// modulus is real and positive. Ties (within [`tol::EIG_TIE_REL`]) are ordered
/// lexicographically by the real parts of the normalized eigenvectors.
pub fn herm_eig(h: &HermitianMatrix) -> Result<HermEig, LinalgError> {
    let n = h.dim();
    if n == 0 {
        return Ok(HermEig { values: vec![], vectors: ComplexMatrix::zeros(0, 0) });
    }
    let eig = h
        .matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(LinalgError::NoConvergence)?;
    let radius = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut pairs: Vec<(f64, ComplexVector)> = (0..n)
        .map(|k| (eig.eigenvalues[k], normalize_phase(eig.eigenvectors.column(k).into_owned())))
        .collect();
    let tie = tol::EIG_TIE_REL * radius.max(f64::MIN_POSITIVE);
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            lex_real(&a.1, &b.1)
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let values = pairs.iter().map(|p| p.0).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (k, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(k, v);
    }
    Ok(HermEig { values, vectors })
}

fn normalize_phase(mut v: ComplexVector) -> ComplexVector {
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::new(norm, 0.0);
    }
    let peak = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if let Some(z) = v.iter().find(|z| z.norm() >= peak * (1.0 - 1e-9)).copied() {
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            v *= phase;
        }
    }
    v
}

fn lex_real(a: &ComplexVector, b: &ComplexVector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.re.partial_cmp(&x.re) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Real symmetric embedding `[[Re h, -Im h], [Im h, Re h]]`.
pub fn embed_real(h: &HermitianMatrix) -> RealMatrix {
    let n = h.dim();
    let m = h.matrix();
    let mut out = RealMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

/// Maps a real symmetric `2n x 2n` matrix back to an `n x n` Hermitian matrix.
///
/// For `x = embed_real(g)` this returns `g`. For an arbitrary PSD `x` the
/// result is PSD and satisfies `Tr(a g) = Tr(embed_real(a) x) / 2`.
pub fn unembed_real(x: &RealMatrix) -> Result<HermitianMatrix, LinalgError> {
    if x.nrows() != x.ncols() || !x.nrows().is_multiple_of(2) {
        return Err(LinalgError::DimensionMismatch(format!(
            "embedded matrix must be square of even size, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let n = x.nrows() / 2;
    let mut g = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
            let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
            g[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(HermitianMatrix::symmetrized(g))
}

/// `w^H a w`.
pub fn quad_form(w: &ComplexVector, a: &ComplexMatrix) -> Result<Complex64, LinalgError> {
    if a.nrows() != w.len() || a.ncols() != w.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "vector of length {} against {}x{} matrix",
            w.len(),
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(w.dotc(&(a * w)))
}

/// Real part of `w^H h w` for Hermitian `h`; panics on a dimension mismatch.
pub fn herm_form(w: &ComplexVector, h: &HermitianMatrix) -> f64 {
    w.dotc(&(h.matrix() * w)).re
}

/// PSD square root; eigenvalues at or below rounding level are treated as zero.
pub fn psd_sqrt(h: &HermitianMatrix) -> Result<ComplexMatrix, LinalgError> {
    let eig = herm_eig(h)?;
    let n = h.dim();
    // eigenvalues at rounding level are zeroed so the root keeps the numerical rank
    let floor = n as f64 * f64::EPSILON * eig.max().max(0.0);
    let mut scaled = eig.vectors.clone();
    for k in 0..n {
        let v = eig.values[k];
        let s = if v > floor { v.sqrt() } else { 0.0 };
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    Ok(&scaled * eig.vectors.adjoint())
}

/// Orthonormal basis (as columns) of the null space of `a`, using singular
/// values below `rel_tol * sigma_max` as zero.
pub fn null_space(a: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix, LinalgError> {
    let n = a.ncols();
    // pad to at least square so the SVD returns a full set of right vectors
    let padded = if a.nrows() < n {
        let mut p = ComplexMatrix::zeros(n, n);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.try_svd(false, true, f64::EPSILON, 0).ok_or(LinalgError::NoConvergence)?;
    let v_t = svd.v_t.ok_or(LinalgError::NoConvergence)?;
    let top = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    let keep: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= rel_tol * top).collect();
    let mut basis = ComplexMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).adjoint());
    }
    Ok(basis)
}

/// Singular values, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
        HermitianMatrix::symmetrized(random_matrix(rng, n, n))
    }

    fn max_abs(m: &ComplexMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Index-formula Kronecker product.
    fn kron_oracle(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let (rb, cb) = (b.nrows(), b.ncols());
        ComplexMatrix::from_fn(a.nrows() * rb, a.ncols() * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
    }

    #[test]
    fn kron_identity_and_scalar() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2).unwrap(), ComplexMatrix::identity(4, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(&mut rng, 3, 2);
        let two = ComplexMatrix::from_element(1, 1, c(2.0, 0.0));
        assert!(max_abs(&(kron(&two, &b).unwrap() - &b * c(2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn kron_rejects_empty() {
        let e = ComplexMatrix::zeros(0, 3);
        assert_eq!(kron(&e, &ComplexMatrix::identity(2, 2)), Err(LinalgError::Empty));
    }

    #[test]
    fn kron_matches_index_formula_and_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (a, b, cm, d) = (
                random_matrix(&mut rng, 2, 2),
                random_matrix(&mut rng, 2, 2),
                random_matrix(&mut rng, 2, 2),
                random_matrix(&mut rng, 2, 2),
            );
            assert!(max_abs(&(kron(&a, &b).unwrap() - kron_oracle(&a, &b))) < 1e-15);
            let lhs = kron_oracle(&a, &b) * kron_oracle(&cm, &d);
            let rhs = kron_oracle(&(&a * &cm), &(&b * &d));
            assert!(max_abs(&(lhs - rhs)) < 1e-12);
            // transpose identity
            let lhs = kron(&a, &b).unwrap().transpose();
            let rhs = kron(&a.transpose(), &b.transpose()).unwrap();
            assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn vec_stacks_columns() {
        // [[1,3],[2,4]]
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(3., 0.), c(2., 0.), c(4., 0.)]);
        let v: Vec<f64> = vec(&a).iter().map(|z| z.re).collect();
        assert_eq!(v, vec![1., 2., 3., 4.]);
        let v: Vec<f64> = vec(&ComplexMatrix::identity(2, 2)).iter().map(|z| z.re).collect();
        assert_eq!(v, vec![1., 0., 0., 1.]);
        assert_eq!(unvec(&vec(&a), 2, 2).unwrap(), a);
    }

    #[test]
    fn vectorization_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 2, 2);
            let cm = random_matrix(&mut rng, 2, 2);
            // vec(ABC) = (C^T ⊗ A) vec(B)
            let lhs = vec(&(&a * &b * &cm));
            let rhs = kron_oracle(&cm.transpose(), &a) * vec(&b);
            assert!((lhs - rhs).camax() < 1e-12);
            // Tr(A^T B) = vec(A)^T vec(B)
            let lhs = (a.transpose() * &b).trace();
            let rhs = vec(&a).transpose() * vec(&b);
            assert!((lhs - rhs[(0, 0)]).norm() < 1e-12);
            // vec(I)^T (A^T ⊗ B) = vec(A^T)^T (I ⊗ B)
            let i2 = ComplexMatrix::identity(2, 2);
            let lhs = vec(&i2).transpose() * kron_oracle(&a.transpose(), &b);
            let rhs = vec(&a.transpose()).transpose() * kron_oracle(&i2, &b);
            assert!((lhs - rhs).camax() < 1e-12);
        }
    }

    #[test]
    fn herm_eig_diagonal() {
        let e = herm_eig(&HermitianMatrix::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!((e.vectors[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((e.vectors[(0, 1)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn herm_eig_pauli_y() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
        let e = herm_eig(&HermitianMatrix::new(m).unwrap()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn herm_eig_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_matrix(&mut rng, 4, 1).column(0).into_owned();
        let e = herm_eig(&HermitianMatrix::outer(&w)).unwrap();
        assert!((e.values[0] - w.norm_squared()).abs() < 1e-12);
        for v in &e.values[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn herm_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 5, 9] {
            let h = random_hermitian(&mut rng, n);
            let e = herm_eig(&h).unwrap();
            let d = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(n, e.values.iter().map(|&x| c(x, 0.0))));
            let rec = &e.vectors * d * e.vectors.adjoint();
            let scale = max_abs(h.matrix()).max(1.0);
            assert!(max_abs(&(rec - h.matrix())) < tol::RECONSTRUCTION * scale);
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!(max_abs(&(gram - ComplexMatrix::identity(n, n))) < tol::RECONSTRUCTION);
            assert!(e.values.windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn herm_eig_is_deterministic_under_ties() {
        let e1 = herm_eig(&HermitianMatrix::identity(3)).unwrap();
        let e2 = herm_eig(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(e1.vectors, e2.vectors);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(HermitianMatrix::new(m), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn embed_identity_and_spectrum_doubling() {
        assert_eq!(embed_real(&HermitianMatrix::identity(3)), RealMatrix::identity(6, 6));
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
        let x = embed_real(&HermitianMatrix::new(m).unwrap());
        assert_eq!(x, x.transpose());
        let mut ev: Vec<f64> = x.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_trace_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = random_hermitian(&mut rng, 3);
            let g = random_hermitian(&mut rng, 3);
            let lhs = (embed_real(&a) * embed_real(&g)).trace();
            let rhs = 2.0 * (a.matrix() * g.matrix()).trace().re;
            assert!((lhs - rhs).abs() < 1e-12);
            assert!((a.trace_product(&g) - rhs / 2.0).abs() < 1e-12);
            let back = unembed_real(&embed_real(&g)).unwrap();
            assert!(max_abs(&(back.matrix() - g.matrix())) < 1e-15);
        }
    }

    #[test]
    fn quad_form_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = random_matrix(&mut rng, 4, 1).column(0).into_owned();
        let q = quad_form(&w, &ComplexMatrix::identity(4, 4)).unwrap();
        assert!((q.re - w.norm_squared()).abs() < 1e-12 && q.im.abs() < 1e-12);
        let a = random_matrix(&mut rng, 4, 4);
        let e1 = ComplexVector::from_fn(4, |i, _| if i == 0 { c(1., 0.) } else { c(0., 0.) });
        assert_eq!(quad_form(&e1, &a).unwrap(), a[(0, 0)]);
        let h = random_hermitian(&mut rng, 4);
        let q = quad_form(&w, h.matrix()).unwrap();
        assert!(q.im.abs() < 1e-12 * q.norm().max(1.0));
        assert!(quad_form(&w, &ComplexMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn null_space_of_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 4, 1) * random_matrix(&mut rng, 1, 4);
        let ns = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.ncols(), 3);
        assert!(max_abs(&(&a * &ns)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let b = random_matrix(&mut rng, 3, 3);
        let h = HermitianMatrix::symmetrized(&b * b.adjoint());
        let r = psd_sqrt(&h).unwrap();
        assert!(max_abs(&(&r * &r - h.matrix())) < 1e-12);
    }
}
