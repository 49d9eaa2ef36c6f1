use serde::{Deserialize, Serialize};

use super::grid::{BoundaryCondition, CoefficientFields, Grid2D};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// 3×3 stencil indexed `[row][col]`; row 0 is the upper row of the printed
/// square and column 0 the left column.
pub type StencilS = [[f64; 3]; 3];

/// Constant-coefficient stencil `S` in its printed 3×3 form.
///
/// Row `r` of the square is read as offset `j + r − 1` and column `c` as
/// `i + c − 1`.
///
/// With `a12 = 0` an interior row of the assembled `L` (with `κ² = 0`) is
/// `−S`. The a12 terms here carry the opposite sign to the flux-form
/// assembly, whose interior rows are `−constant_stencil(a11, −a12, a22)`.
pub fn constant_stencil(a11: f64, a12: f64, a22: f64, h: f64) -> Result<StencilS> {
    if !(h > 0.0) {
        return Err(Error::arg(format!("grid spacing must be positive, got {h}")));
    }
    let s = -1.0 / (h * h);
    Ok([
        [s * a12, s * (-a22 - a12), 0.0],
        [s * (-a11 - a12), s * 2.0 * (a11 + a22 + a12), s * (-a11 - a12)],
        [0.0, s * (-a22 - a12), s * a12],
    ])
}

/// Assembles `L = κ² − (Λxx + Λxy⁺ + Λyx⁺ + Λyy)` as an `n × n` sparse matrix.
///
/// Each row has at most seven entries: the node, its four edge neighbours and
/// the corners `(i+1, j+1)` and `(i−1, j−1)`. Boundary rows use ghost nodes
/// resolved by `bc`; with Dirichlet conditions ghost values are zero while the
/// coefficients are mirrored.
pub fn assemble_operator(grid: &Grid2D, coeffs: &CoefficientFields, bc: BoundaryCondition) -> Result<SparseMatrix> {
    grid.validate()?;
    coeffs.validate(grid)?;
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let half = 0.5 * inv_h2;

    let coef = |f: &[f64], i: isize, j: isize| -> f64 {
        f[bc.resolve_coefficient(i, nx) + nx * bc.resolve_coefficient(j, ny)]
    };
    let alpha11 = |i: isize, j: isize| 0.5 * (coef(&coeffs.a11, i, j) + coef(&coeffs.a11, i - 1, j));
    let alpha22 = |i: isize, j: isize| 0.5 * (coef(&coeffs.a22, i, j) + coef(&coeffs.a22, i, j - 1));

    let mut trip = Vec::with_capacity(7 * grid.len());
    // weights of Λ for the current row, keyed by offset (di, dj) in [-1, 1]²
    let mut w = [[0.0f64; 3]; 3];
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            for r in w.iter_mut() {
                *r = [0.0; 3];
            }
            let mut put = |di: isize, dj: isize, v: f64| w[(di + 1) as usize][(dj + 1) as usize] += v;

            // Λxx
            let ae = alpha11(i + 1, j);
            let aw = alpha11(i, j);
            put(1, 0, ae * inv_h2);
            put(0, 0, -(ae + aw) * inv_h2);
            put(-1, 0, aw * inv_h2);

            // Λyy
            let an = alpha22(i, j + 1);
            let as_ = alpha22(i, j);
            put(0, 1, an * inv_h2);
            put(0, 0, -(an + as_) * inv_h2);
            put(0, -1, as_ * inv_h2);

            let c = coef(&coeffs.a12, i, j);

            // Λxy⁺
            let ce = coef(&coeffs.a12, i + 1, j);
            let cw = coef(&coeffs.a12, i - 1, j);
            put(1, 1, ce * half);
            put(1, 0, -ce * half);
            put(0, 1, -c * half);
            put(0, 0, 2.0 * c * half);
            put(0, -1, -c * half);
            put(-1, 0, -cw * half);
            put(-1, -1, cw * half);

            // Λyx⁺
            let cn = coef(&coeffs.a12, i, j + 1);
            let cs = coef(&coeffs.a12, i, j - 1);
            put(1, 1, cn * half);
            put(0, 1, -cn * half);
            put(1, 0, -c * half);
            put(0, 0, 2.0 * c * half);
            put(-1, 0, -c * half);
            put(0, -1, -cs * half);
            put(-1, -1, cs * half);

            let row = grid.index(i as usize, j as usize);
            trip.push((row, row, coeffs.kappa2[row]));
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let v = w[(di + 1) as usize][(dj + 1) as usize];
                    if v == 0.0 && !(di == 0 && dj == 0) {
                        continue;
                    }
                    let (Some(ci), Some(cj)) = (bc.resolve_value(i + di, nx), bc.resolve_value(j + dj, ny)) else {
                        continue;
                    };
                    trip.push((row, ci + nx * cj, -v));
                }
            }
        }
    }
    SparseMatrix::from_triplets(grid.len(), grid.len(), &trip)
}

/// Rescaling applied when turning `L` into a precision matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// `Q = τ² h² LᵀL`.
    None,
    /// Multiply by the stationary marginal variance `1/(4πκ²)` at the median
    /// κ² so that the field has roughly unit variance.
    #[default]
    MedianKappa,
}

/// Constant `c` in `Q = τ² c h² LᵀL`.
pub fn normalization_constant(coeffs: &CoefficientFields, normalization: Normalization) -> Result<f64> {
    match normalization {
        Normalization::None => Ok(1.0),
        Normalization::MedianKappa => {
            let k2 = coeffs.median_kappa2();
            if !(k2 > 0.0) {
                return Err(Error::domain("variance normalisation needs a positive median kappa2"));
            }
            Ok(1.0 / (4.0 * std::f64::consts::PI * k2))
        }
    }
}

/// `Q = τ² c h² LᵀL`; symmetric positive definite whenever `L` is nonsingular.
pub fn precision_from_operator(l: &SparseMatrix, tau2: f64, h: f64, c: f64) -> Result<SparseMatrix> {
    if l.nrows() != l.ncols() {
        return Err(Error::arg("operator must be square"));
    }
    if !(tau2 > 0.0) || !(c > 0.0) {
        return Err(Error::arg(format!("precision scale must be positive (tau2 = {tau2}, c = {c})")));
    }
    Ok(l.gram().scale(tau2 * c * h * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_interior_row_is_five_point() {
        let g = Grid2D::new(5, 5, 0.5).unwrap();
        let c = CoefficientFields::isotropic(&g, 0.3);
        let l = assemble_operator(&g, &c, BoundaryCondition::Neumann).unwrap();
        let k = g.index(2, 2);
        let row: Vec<_> = l.row(k).filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(row.len(), 5);
        assert!((l.get(k, k) - (0.3 + 16.0)).abs() < 1e-12);
        assert!((l.get(k, k + 1) + 4.0).abs() < 1e-12);
        assert!((l.get(k, k + 5) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn row_sums_equal_kappa2_without_dirichlet() {
        let g = Grid2D::new(6, 5, 1.0).unwrap();
        let mut c = CoefficientFields::constant(&g, 1.3, 0.4, 0.8, 0.2);
        c.a11[7] = 2.0;
        c.a12[12] = -0.1;
        for bc in [BoundaryCondition::Neumann, BoundaryCondition::Periodic] {
            let l = assemble_operator(&g, &c, bc).unwrap();
            for k in 0..g.len() {
                let s: f64 = l.row(k).map(|(_, v)| v).sum();
                assert!((s - 0.2).abs() < 1e-12, "{bc:?} row {k}: {s}");
            }
        }
    }

    #[test]
    fn stencil_with_zero_cross_term_matches_rows() {
        let g = Grid2D::new(5, 5, 1.0).unwrap();
        let c = CoefficientFields::constant(&g, 1.5, 0.0, 0.7, 0.0);
        let l = assemble_operator(&g, &c, BoundaryCondition::Periodic).unwrap();
        let s = constant_stencil(1.5, 0.0, 0.7, 1.0).unwrap();
        let k = g.index(2, 2);
        for (r, dj) in [(0, -1isize), (1, 0), (2, 1)] {
            for (col, di) in [(0, -1isize), (1, 0), (2, 1)] {
                let m = g.index((2 + di) as usize, (2 + dj) as usize);
                assert!((l.get(k, m) + s[r][col]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalisation_uses_median() {
        let g = Grid2D::new(3, 3, 1.0).unwrap();
        let mut c = CoefficientFields::isotropic(&g, 0.1);
        c.kappa2[0] = 50.0;
        let v = normalization_constant(&c, Normalization::MedianKappa).unwrap();
        assert!((v - 1.0 / (0.4 * std::f64::consts::PI)).abs() < 1e-12);
        c.kappa2 = vec![0.0; 9];
        assert!(normalization_constant(&c, Normalization::MedianKappa).is_err());
    }
}
