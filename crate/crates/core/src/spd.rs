//! Geometry of the cone of symmetric positive-definite matrices under the
//! affine-invariant metric.
//!
//! Matrices here are small (the cross-field correlation matrices are 3×3), so
//! every matrix function goes through a symmetric eigendecomposition.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues below `EIGEN_FLOOR * λ_max` are treated as non-positive.
pub const EIGEN_FLOOR: f64 = 1e-12;

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::arg(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    Ok(())
}

fn symmetrized(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(&m)?;
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(Error::domain(format!(
                    "matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap:e}"
                )));
            }
        }
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Symmetric matrix, an element of the tangent space at any SPD point.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        symmetrized(m).map(SymMatrix)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Matrix exponential; always SPD.
    pub fn exp(&self) -> Result<SpdMatrix> {
        let eig = SymmetricEigen::new(self.0.clone());
        SpdMatrix::new(rebuild(&eig, f64::exp))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.0)
    }
}

/// Symmetric positive-definite matrix.
#[derive(Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let vals = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let u = &eig.eigenvectors;
    let m = u * DMatrix::from_diagonal(&vals) * u.transpose();
    (&m + m.transpose()) * 0.5
}

impl SpdMatrix {
    /// Validates symmetry and the eigenvalue floor.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let m = symmetrized(m)?;
        let eig = SymmetricEigen::new(m.clone());
        check_spectrum(&eig.eigenvalues)?;
        Ok(SpdMatrix(m))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::arg("rows must form a square matrix"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Unit-diagonal 3×3 correlation matrix from its off-diagonal entries
    /// `(ρ12, ρ13, ρ23)`.
    pub fn correlation3(r12: f64, r13: f64, r23: f64) -> Result<Self> {
        Self::from_rows(&[&[1.0, r12, r13], &[r12, 1.0, r23], &[r13, r23, 1.0]])
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    pub fn inverse(&self) -> SpdMatrix {
        let inv = self
            .0
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| rebuild(&self.eigen(), f64::recip));
        SpdMatrix((&inv + inv.transpose()) * 0.5)
    }

    /// Lower-triangular Cholesky factor `C` with `self = C Cᵀ`.
    pub fn cholesky_lower(&self) -> Result<DMatrix<f64>> {
        self.0
            .clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::domain("Cholesky factorization failed"))
    }

    pub fn log_det(&self) -> f64 {
        match self.0.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => self.eigen().eigenvalues.iter().map(|l| l.ln()).sum(),
        }
    }

    /// Principal matrix logarithm, a point in the tangent space.
    pub fn log(&self) -> SymMatrix {
        SymMatrix(rebuild(&self.eigen(), f64::ln))
    }

    /// Congruence transform `Xᵀ self X` for an invertible `X`.
    pub fn congruence(&self, x: &DMatrix<f64>) -> Result<SpdMatrix> {
        if x.nrows() != self.dim() || x.ncols() != self.dim() {
            return Err(Error::arg("congruence matrix has the wrong shape"));
        }
        SpdMatrix::new(x.transpose() * &self.0 * x)
    }
}

fn check_spectrum(vals: &DVector<f64>) -> Result<()> {
    let max = vals.max();
    let min = vals.min();
    if !(max > 0.0) || min <= EIGEN_FLOOR * max {
        return Err(Error::domain(format!(
            "matrix is not positive definite (eigenvalues in [{min:e}, {max:e}])"
        )));
    }
    Ok(())
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpdMatrix{}", self.0)
    }
}

/// Position along a geodesic, restricted to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct GeodesicParam(f64);

impl GeodesicParam {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::arg(format!("geodesic parameter {t} outside [0, 1]")));
        }
        Ok(GeodesicParam(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `A^t = U diag(λᵢ^t) Uᵀ`.
pub fn spd_power(a: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if t == 1.0 {
        return Ok(a.clone());
    }
    if t == 0.0 {
        return Ok(SpdMatrix::identity(a.dim()));
    }
    SpdMatrix::new(rebuild(&a.eigen(), |l| l.powf(t)))
}

fn same_dim(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::arg(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// `A^{1/2}` and `A^{-1/2}` from a single eigendecomposition.
fn sqrt_pair(a: &SpdMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = a.eigen();
    (rebuild(&eig, f64::sqrt), rebuild(&eig, |l| 1.0 / l.sqrt()))
}

/// The whitened matrix `A^{-1/2} B A^{-1/2}`, symmetrized.
fn whitened(a_inv_sqrt: &DMatrix<f64>, b: &SpdMatrix) -> DMatrix<f64> {
    let m = a_inv_sqrt * b.as_matrix() * a_inv_sqrt;
    (&m + m.transpose()) * 0.5
}

/// Point `A #_t B = A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}` on the geodesic
/// from `A` (t = 0) to `B` (t = 1). The endpoints are returned unchanged.
pub fn geodesic_point(a: &SpdMatrix, b: &SpdMatrix, t: GeodesicParam) -> Result<SpdMatrix> {
    same_dim(a, b)?;
    let t = t.value();
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let (a_sqrt, a_inv_sqrt) = sqrt_pair(a);
    let inner = SymmetricEigen::new(whitened(&a_inv_sqrt, b));
    let powered = rebuild(&inner, |l| l.powf(t));
    SpdMatrix::new(&a_sqrt * powered * &a_sqrt)
}

/// Riemannian distance `‖log(A^{-1/2} B A^{-1/2})‖_F`.
pub fn geodesic_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dim(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    let (_, a_inv_sqrt) = sqrt_pair(a);
    let inner = SymmetricEigen::new(whitened(&a_inv_sqrt, b));
    Ok(inner.eigenvalues.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Length of a sampled curve: the sum of geodesic chord lengths between
/// consecutive samples. Converges to the integrated line element as the
/// sampling is refined.
pub fn curve_length(samples: &[SpdMatrix]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::arg("curve_length needs at least two samples"));
    }
    samples
        .windows(2)
        .map(|w| geodesic_distance(&w[0], &w[1]))
        .sum()
}

/// Boltzmann entropy `½ log det Σ` with `Σ = Q⁻¹`, i.e. `-½ log det Q`.
/// The additive constant is zero.
pub fn boltzmann_entropy(q: &SpdMatrix) -> f64 {
    -0.5 * q.log_det()
}

#[derive(Clone, Debug)]
pub struct CorrelationReport {
    pub is_correlation: bool,
    pub max_diag_deviation: f64,
    /// `D^{-1/2} A D^{-1/2}` with `D = diag(A)`.
    pub renormalized: SpdMatrix,
}

pub fn correlation_check(a: &SpdMatrix, tol: f64) -> CorrelationReport {
    let d = a.as_matrix().diagonal();
    let max_diag_deviation = d.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let n = a.dim();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            a.get(i, j) / (d[i] * d[j]).sqrt()
        }
    });
    CorrelationReport {
        is_correlation: max_diag_deviation <= tol,
        max_diag_deviation,
        renormalized: SpdMatrix(m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol * b.amax().max(1.0)
    }

    fn sample_pair() -> (SpdMatrix, SpdMatrix) {
        let a = SpdMatrix::correlation3(0.7, 0.2, 0.4).unwrap();
        let b = SpdMatrix::correlation3(0.7, -0.9, -0.85).unwrap();
        (a, b)
    }

    #[test]
    fn power_examples() {
        let (a, _) = sample_pair();
        assert_eq!(spd_power(&a, 1.0).unwrap(), a);
        assert_eq!(spd_power(&a, 0.0).unwrap(), SpdMatrix::identity(3));
        let d = SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap();
        let r = spd_power(&d, 0.5).unwrap();
        assert!(close(r.as_matrix(), SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap().as_matrix(), 1e-14));
    }

    #[test]
    fn power_composes() {
        let (a, _) = sample_pair();
        let lhs = spd_power(&spd_power(&a, 0.3).unwrap(), -2.5).unwrap();
        let rhs = spd_power(&a, -0.75).unwrap();
        assert!(close(lhs.as_matrix(), rhs.as_matrix(), 1e-10));
    }

    #[test]
    fn geodesic_examples() {
        let (a, b) = sample_pair();
        let g0 = geodesic_point(&a, &b, GeodesicParam::new(0.0).unwrap()).unwrap();
        let g1 = geodesic_point(&a, &b, GeodesicParam::new(1.0).unwrap()).unwrap();
        assert_eq!(g0, a);
        assert_eq!(g1, b);
        let four = SpdMatrix::from_diagonal(&[4.0; 3]).unwrap();
        let mid = geodesic_point(&SpdMatrix::identity(3), &four, GeodesicParam::new(0.5).unwrap()).unwrap();
        assert!(close(mid.as_matrix(), &(DMatrix::identity(3, 3) * 2.0), 1e-14));
    }

    #[test]
    fn distance_examples() {
        let (a, _) = sample_pair();
        assert!(geodesic_distance(&a, &a).unwrap().abs() < 1e-12);
        let e2 = SpdMatrix::from_diagonal(&[(2.0f64).exp(), 1.0, 1.0]).unwrap();
        let d = geodesic_distance(&SpdMatrix::identity(3), &e2).unwrap();
        assert!((d - 2.0).abs() < 1e-13);
    }

    #[test]
    fn dimension_mismatch_is_an_argument_error() {
        let a = SpdMatrix::identity(2);
        let b = SpdMatrix::identity(3);
        assert!(matches!(geodesic_distance(&a, &b), Err(Error::Argument(_))));
        assert!(matches!(
            geodesic_point(&a, &b, GeodesicParam::new(0.5).unwrap()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn rejects_non_spd_and_asymmetric() {
        assert!(matches!(
            SpdMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            SpdMatrix::from_rows(&[&[1.0, 0.1], &[0.2, 1.0]]),
            Err(Error::Domain(_))
        ));
        assert!(GeodesicParam::new(1.5).is_err());
    }

    #[test]
    fn curve_length_examples() {
        let (a, b) = sample_pair();
        assert_eq!(curve_length(&[a.clone(), a.clone(), a.clone()]).unwrap(), 0.0);
        assert!(curve_length(&[a.clone()]).is_err());
        let pts: Vec<_> = (0..=20)
            .map(|k| geodesic_point(&a, &b, GeodesicParam::new(k as f64 / 20.0).unwrap()).unwrap())
            .collect();
        let whole = curve_length(&pts).unwrap();
        let split = curve_length(&pts[..=10]).unwrap() + curve_length(&pts[10..]).unwrap();
        assert!((whole - split).abs() < 1e-10);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(boltzmann_entropy(&SpdMatrix::identity(3)), 0.0);
        let q = SpdMatrix::from_diagonal(&[(-2.0f64).exp(); 3]).unwrap();
        assert!((boltzmann_entropy(&q) - 3.0).abs() < 1e-13);
        let (a, _) = sample_pair();
        assert!((boltzmann_entropy(&a) + boltzmann_entropy(&a.inverse())).abs() < 1e-13);
    }

    #[test]
    fn correlation_examples() {
        let r = correlation_check(&SpdMatrix::identity(3), 1e-8);
        assert!(r.is_correlation);
        assert_eq!(r.max_diag_deviation, 0.0);
        let r = correlation_check(&SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap(), 1e-8);
        assert!(!r.is_correlation);
        assert_eq!(r.max_diag_deviation, 3.0);
        assert_eq!(r.renormalized, SpdMatrix::identity(2));
    }

    #[test]
    fn log_exp_round_trip() {
        let (a, _) = sample_pair();
        let back = a.log().exp().unwrap();
        assert!(close(back.as_matrix(), a.as_matrix(), 1e-13));
    }
}
