use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::interface::{blend_parameter, signed_distance, Interface};
use crate::discretize::Grid2D;
use crate::error::{Error, Result};
use crate::spd::{correlation_check, geodesic_point, GeodesicParam, SpdMatrix};

/// Tolerance on the unit diagonal of blend endpoints.
pub const CORRELATION_TOL: f64 = 1e-8;

/// Two layer correlation matrices joined across an interface.
#[derive(Clone, Debug)]
pub struct BlendSpec {
    pub sigma_above: SpdMatrix,
    pub sigma_below: SpdMatrix,
    /// Width of the transition zone in length units; 0 gives a sharp change.
    pub range: f64,
    pub interface: Interface,
}

impl BlendSpec {
    pub fn new(sigma_above: SpdMatrix, sigma_below: SpdMatrix, range: f64, interface: Interface) -> Result<Self> {
        let spec = BlendSpec { sigma_above, sigma_below, range, interface };
        spec.validate()?;
        Ok(spec)
    }

    /// Same correlation matrix on both sides.
    pub fn constant(sigma: SpdMatrix) -> Self {
        BlendSpec {
            sigma_above: sigma.clone(),
            sigma_below: sigma,
            range: 0.0,
            interface: Interface::Flat { depth: 0.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_above.dim() != self.sigma_below.dim() {
            return Err(Error::arg("blend endpoints have different dimensions"));
        }
        for (name, s) in [("sigma_above", &self.sigma_above), ("sigma_below", &self.sigma_below)] {
            let rep = correlation_check(s, CORRELATION_TOL);
            if !rep.is_correlation {
                return Err(Error::domain(format!(
                    "{name} is not a correlation matrix (diagonal off by {:e})",
                    rep.max_diag_deviation
                )));
            }
        }
        if !(self.range >= 0.0) || !self.range.is_finite() {
            return Err(Error::arg(format!("blend range must be non-negative, got {}", self.range)));
        }
        self.interface.validate()
    }
}

/// Local cross-field structure at every node.
#[derive(Clone, Debug)]
pub struct BlendField {
    /// Geodesic parameter per node.
    pub t: Vec<f64>,
    /// `Σ₀(s)`.
    pub sigma: Vec<SpdMatrix>,
    /// `Q₀(s) = Σ₀(s)⁻¹`.
    pub q: Vec<SpdMatrix>,
    /// Upper-triangular `u(s)` with `u(s)ᵀ u(s) = Q₀(s)`.
    pub u: Vec<DMatrix<f64>>,
}

/// Per-`t` values shared by all nodes with the same parameter.
#[derive(Clone)]
struct Local {
    sigma: SpdMatrix,
    q: SpdMatrix,
    u: DMatrix<f64>,
}

fn local(spec: &BlendSpec, t: f64) -> Result<Local> {
    let sigma = geodesic_point(&spec.sigma_above, &spec.sigma_below, GeodesicParam::new(t)?)?;
    let q = sigma.inverse();
    let u = q.cholesky_lower()?.transpose();
    Ok(Local { sigma, q, u })
}

impl BlendField {
    pub fn dim(&self) -> usize {
        self.sigma.first().map_or(0, SpdMatrix::dim)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Entry `(a, b)` of `Q₀(s)` for every node.
    pub fn q_entry(&self, a: usize, b: usize) -> Vec<f64> {
        self.q.iter().map(|q| q.get(a, b)).collect()
    }

    /// `Σ_s log det Q₀(s)`.
    pub fn sum_log_det_q(&self) -> f64 {
        // nodes share few distinct matrices, so group by t
        let mut cache: HashMap<u64, f64> = HashMap::new();
        self.t
            .iter()
            .zip(&self.q)
            .map(|(t, q)| *cache.entry(t.to_bits()).or_insert_with(|| q.log_det()))
            .sum()
    }
}

/// Evaluates the geodesic blend at every node. Nodes sharing a geodesic
/// parameter share one evaluation.
pub fn build_blend_field(grid: &Grid2D, spec: &BlendSpec) -> Result<BlendField> {
    spec.validate()?;
    let n = grid.len();
    let mut cache: HashMap<u64, Local> = HashMap::new();
    let mut out = BlendField {
        t: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = blend_parameter(signed_distance(grid.coords(k), &spec.interface), spec.range);
        let loc = match cache.get(&t.to_bits()) {
            Some(l) => l.clone(),
            None => {
                let l = local(spec, t)?;
                cache.insert(t.to_bits(), l.clone());
                l
            }
        };
        out.t.push(t);
        out.sigma.push(loc.sigma);
        out.q.push(loc.q);
        out.u.push(loc.u);
    }
    Ok(out)
}

/// Which side of the interface a property applies to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Above,
    #[default]
    Below,
    Everywhere,
}

impl Region {
    /// Membership by signed distance; the interface itself counts as below.
    pub fn contains(self, dist: f64) -> bool {
        match self {
            Region::Above => dist < 0.0,
            Region::Below => dist >= 0.0,
            Region::Everywhere => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(range: f64) -> BlendSpec {
        BlendSpec::new(
            SpdMatrix::correlation3(0.7, 0.2, 0.4).unwrap(),
            SpdMatrix::correlation3(0.7, -0.9, -0.85).unwrap(),
            range,
            Interface::Flat { depth: 8.0 },
        )
        .unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let g = Grid2D::new(4, 17, 1.0).unwrap();
        let s = spec(4.0);
        let f = build_blend_field(&g, &s).unwrap();
        assert_eq!(f.sigma[g.index(1, 0)], s.sigma_above);
        assert_eq!(f.sigma[g.index(1, 16)], s.sigma_below);
        let mid = geodesic_point(&s.sigma_above, &s.sigma_below, GeodesicParam::new(0.5).unwrap()).unwrap();
        assert!((f.sigma[g.index(2, 8)].as_matrix() - mid.as_matrix()).amax() < 1e-14);
        for k in 0..g.len() {
            let back = f.u[k].transpose() * &f.u[k];
            assert!((back - f.q[k].as_matrix()).amax() < 1e-12);
            assert!(f.u[k][(1, 0)] == 0.0 && f.u[k][(2, 0)] == 0.0 && f.u[k][(2, 1)] == 0.0);
        }
    }

    #[test]
    fn locality() {
        let g = Grid2D::new(3, 20, 1.0).unwrap();
        let s = spec(6.0);
        let f = build_blend_field(&g, &s).unwrap();
        for k in 0..g.len() {
            let d = signed_distance(g.coords(k), &s.interface);
            if d < -3.0 {
                assert_eq!(f.sigma[k], s.sigma_above);
            } else if d > 3.0 {
                assert_eq!(f.sigma[k], s.sigma_below);
            }
        }
    }

    #[test]
    fn rejects_non_correlation() {
        let bad = SpdMatrix::from_diagonal(&[2.0, 1.0, 1.0]).unwrap();
        assert!(BlendSpec::new(bad, SpdMatrix::identity(3), 1.0, Interface::Flat { depth: 0.0 }).is_err());
    }
}
