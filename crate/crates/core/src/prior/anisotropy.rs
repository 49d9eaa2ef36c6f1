use serde::{Deserialize, Serialize};

use super::blend::Region;
use super::interface::{signed_distance, Interface};
use crate::discretize::{CoefficientFields, Grid2D};
use crate::error::{Error, Result};

/// Curve-following anisotropy: principal values of `A(s)` along and across
/// the interface tangent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropySpec {
    pub ratio_major: f64,
    pub ratio_minor: f64,
    #[serde(default)]
    pub region: Region,
}

impl AnisotropySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_major > 0.0) || !(self.ratio_minor > 0.0) {
            return Err(Error::arg(format!(
                "anisotropy ratios must be positive, got ({}, {})",
                self.ratio_major, self.ratio_minor
            )));
        }
        Ok(())
    }
}

impl Default for AnisotropySpec {
    /// Unit determinant keeps the marginal variance of the isotropic case.
    fn default() -> Self {
        AnisotropySpec { ratio_major: 4.0, ratio_minor: 0.25, region: Region::Below }
    }
}

/// `A = R(φ) diag(major, minor) R(φ)ᵀ` as `(a11, a12, a22)`.
pub fn rotated_tensor(phi: f64, major: f64, minor: f64) -> (f64, f64, f64) {
    let (s, c) = phi.sin_cos();
    (
        major * c * c + minor * s * s,
        (major - minor) * s * c,
        major * s * s + minor * c * c,
    )
}

/// Tangent angle at `x`, averaged over `x − h, x, x + h`.
fn tangent_angle(interface: &Interface, x: f64, h: f64) -> f64 {
    [x - h, x, x + h]
        .iter()
        .map(|&xx| interface.slope_at(xx).atan())
        .sum::<f64>()
        / 3.0
}

/// Anisotropy tensor field aligned with the interface tangent inside
/// `spec.region` and the identity elsewhere. The returned `kappa2` is zero;
/// callers fill it in.
pub fn anisotropy_from_interface(grid: &Grid2D, interface: &Interface, spec: &AnisotropySpec) -> Result<CoefficientFields> {
    spec.validate()?;
    interface.validate()?;
    let mut c = CoefficientFields::isotropic(grid, 0.0);
    let angles: Vec<f64> = (0..grid.nx).map(|i| tangent_angle(interface, i as f64 * grid.h, grid.h)).collect();
    for k in 0..grid.len() {
        let p = grid.coords(k);
        if spec.region.contains(signed_distance(p, interface)) {
            let (a11, a12, a22) = rotated_tensor(angles[grid.ij(k).0], spec.ratio_major, spec.ratio_minor);
            c.a11[k] = a11;
            c.a12[k] = a12;
            c.a22[k] = a22;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_interface_is_axis_aligned() {
        let g = Grid2D::new(5, 6, 1.0).unwrap();
        let spec = AnisotropySpec { ratio_major: 3.0, ratio_minor: 0.5, region: Region::Everywhere };
        let c = anisotropy_from_interface(&g, &Interface::Flat { depth: 2.0 }, &spec).unwrap();
        for k in 0..g.len() {
            assert_eq!((c.a11[k], c.a12[k], c.a22[k]), (3.0, 0.0, 0.5));
        }
    }

    #[test]
    fn region_below_only() {
        let g = Grid2D::new(4, 6, 1.0).unwrap();
        let c = anisotropy_from_interface(&g, &Interface::Flat { depth: 2.5 }, &AnisotropySpec::default()).unwrap();
        assert_eq!(c.a11[g.index(0, 0)], 1.0);
        assert_eq!(c.a11[g.index(0, 5)], 4.0);
    }

    #[test]
    fn diagonal_tangent() {
        let (a11, a12, a22) = rotated_tensor(std::f64::consts::FRAC_PI_4, 2.0, 0.5);
        // eigenvector (1, 1) with eigenvalue 2
        assert!((a11 + a12 - 2.0).abs() < 1e-14 && (a12 + a22 - 2.0).abs() < 1e-14);
        assert!((a11 * a22 - a12 * a12 - 1.0).abs() < 1e-14);
    }
}
