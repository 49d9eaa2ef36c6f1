use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular 2-D lattice with equal spacing in both directions.
///
/// Node `(i, j)` (i along x, j along y) has linear index `i + nx * j`, so x
/// runs fastest. `y` grows with `j` and is read as depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, h: f64) -> Result<Self> {
        let g = Grid2D { nx, ny, h };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::arg(format!("grid must be at least 3x3, got {}x{}", self.nx, self.ny)));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::arg(format!("grid spacing must be positive, got {}", self.h)));
        }
        Ok(())
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Physical coordinates `(x, y) = (i h, j h)` of node `k`.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (i as f64 * self.h, j as f64 * self.h)
    }

    /// Domain width `nx · h`; a full sine period across the grid uses this.
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.h
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.h
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Reflecting ghost nodes: `u[-1] = u[1]`, `u[n] = u[n-2]`.
    #[default]
    Neumann,
    /// Zero outside the grid.
    Dirichlet,
    /// Wrap-around in both directions.
    Periodic,
}

impl BoundaryCondition {
    /// Maps a possibly out-of-range lattice index onto the grid for field
    /// values; `None` means the value is zero.
    #[inline]
    pub fn resolve_value(self, i: isize, n: usize) -> Option<usize> {
        if i >= 0 && (i as usize) < n {
            return Some(i as usize);
        }
        match self {
            BoundaryCondition::Dirichlet => None,
            BoundaryCondition::Periodic => Some(i.rem_euclid(n as isize) as usize),
            BoundaryCondition::Neumann => Some(reflect(i, n)),
        }
    }

    /// Index resolution for coefficient fields. Coefficients never vanish
    /// outside the grid: they are mirrored, or wrapped when periodic.
    #[inline]
    pub fn resolve_coefficient(self, i: isize, n: usize) -> usize {
        if i >= 0 && (i as usize) < n {
            return i as usize;
        }
        match self {
            BoundaryCondition::Periodic => i.rem_euclid(n as isize) as usize,
            _ => reflect(i, n),
        }
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let last = n as isize - 1;
    let mut i = i;
    // a single reflection suffices for the one-cell reach of the stencil
    if i < 0 {
        i = -i;
    }
    if i > last {
        i = 2 * last - i;
    }
    i.clamp(0, last) as usize
}

/// Per-node coefficients of `κ²(s) − ∇·A(s)∇`, with `A = [[a11, a12], [a12, a22]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFields {
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
    pub kappa2: Vec<f64>,
}

impl CoefficientFields {
    pub fn constant(grid: &Grid2D, a11: f64, a12: f64, a22: f64, kappa2: f64) -> Self {
        let n = grid.len();
        CoefficientFields {
            a11: vec![a11; n],
            a12: vec![a12; n],
            a22: vec![a22; n],
            kappa2: vec![kappa2; n],
        }
    }

    /// `A = I` everywhere.
    pub fn isotropic(grid: &Grid2D, kappa2: f64) -> Self {
        Self::constant(grid, 1.0, 0.0, 1.0, kappa2)
    }

    pub fn len(&self) -> usize {
        self.kappa2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa2.is_empty()
    }

    /// Checks sizes, local positive definiteness of `A`, and `κ² ≥ 0`.
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        let n = grid.len();
        for (name, v) in [("a11", &self.a11), ("a12", &self.a12), ("a22", &self.a22), ("kappa2", &self.kappa2)] {
            if v.len() != n {
                return Err(Error::arg(format!("{name} has {} entries, grid has {n} nodes", v.len())));
            }
        }
        for k in 0..n {
            let (a11, a12, a22) = (self.a11[k], self.a12[k], self.a22[k]);
            if !(a11 > 0.0) || !(a11 * a22 - a12 * a12 > 0.0) {
                return Err(Error::domain(format!(
                    "anisotropy tensor at node {k} is not positive definite ({a11}, {a12}, {a22})"
                )));
            }
            if !(self.kappa2[k] >= 0.0) || !self.kappa2[k].is_finite() {
                return Err(Error::domain(format!("kappa2 at node {k} is negative or non-finite")));
            }
        }
        Ok(())
    }

    /// Median of the κ² field.
    pub fn median_kappa2(&self) -> f64 {
        let mut v = self.kappa2.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}
