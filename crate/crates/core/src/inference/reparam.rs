//! Unconstrained coordinates for 3×3 correlation matrices.
//!
//! The Cholesky factor of a correlation matrix has unit-norm rows. Writing
//! each row in hyperspherical form with partial correlations
//! `w = tanh(z) ∈ (−1, 1)` gives
//!
//! ```text
//! R = [ 1                                           ]
//!     [ w21   √(1−w21²)                             ]
//!     [ w31   w32 √(1−w31²)   √((1−w31²)(1−w32²))  ]
//! ```
//!
//! so every real `z` yields a positive-definite correlation matrix `R Rᵀ`.

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// `(ρ12, ρ13, ρ23)` from unconstrained `(z21, z31, z32)`.
pub fn correlation_from_unconstrained(z: [f64; 3]) -> [f64; 3] {
    let [w21, w31, w32] = z.map(f64::tanh);
    let c21 = (1.0 - w21 * w21).sqrt();
    let c31 = (1.0 - w31 * w31).sqrt();
    [w21, w31, w21 * w31 + c21 * w32 * c31]
}

/// Inverse of [`correlation_from_unconstrained`]. Fails unless the
/// correlations define a positive-definite matrix.
pub fn unconstrained_from_correlation(rho: [f64; 3]) -> Result<[f64; 3]> {
    let [r12, r13, r23] = rho;
    SpdMatrix::correlation3(r12, r13, r23)
        .map_err(|_| Error::domain(format!("correlations {rho:?} do not form a positive definite matrix")))?;
    let w32 = (r23 - r12 * r13) / ((1.0 - r12 * r12) * (1.0 - r13 * r13)).sqrt();
    Ok([r12.atanh(), r13.atanh(), w32.atanh()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for rho in [[0.7, 0.2, 0.4], [0.7, -0.9, -0.85], [0.99, 0.99, 0.99], [-0.99, -0.99, 0.99], [0.0; 3]] {
            let back = correlation_from_unconstrained(unconstrained_from_correlation(rho).unwrap());
            for k in 0..3 {
                assert!((back[k] - rho[k]).abs() < 1e-12, "{rho:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn zero_maps_to_identity() {
        assert_eq!(correlation_from_unconstrained([0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(unconstrained_from_correlation([0.9, 0.9, -0.9]).is_err());
    }
}
