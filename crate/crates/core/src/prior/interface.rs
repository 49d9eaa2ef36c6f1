use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer boundary `y = curve(x)` in grid coordinates, depth increasing with y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interface {
    Flat {
        depth: f64,
    },
    /// `baseline + amplitude · sin(2πx / period + phase)`.
    Sine {
        baseline: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise linear through `(x, y)` vertices, constant beyond the ends.
    Polyline {
        vertices: Vec<[f64; 2]>,
    },
}

impl Interface {
    pub fn validate(&self) -> Result<()> {
        match self {
            Interface::Flat { depth } if !depth.is_finite() => Err(Error::arg("flat interface depth must be finite")),
            Interface::Sine { period, .. } if !(*period > 0.0) => {
                Err(Error::arg(format!("sine period must be positive, got {period}")))
            }
            Interface::Polyline { vertices } => {
                if vertices.is_empty() {
                    return Err(Error::arg("polyline needs at least one vertex"));
                }
                if vertices.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::arg("polyline vertices must be strictly increasing in x"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Depth of the interface at horizontal position `x`.
    pub fn depth_at(&self, x: f64) -> f64 {
        match self {
            Interface::Flat { depth } => *depth,
            Interface::Sine { baseline, amplitude, period, phase } => {
                baseline + amplitude * (2.0 * PI * x / period + phase).sin()
            }
            Interface::Polyline { vertices } => {
                match locate(vertices, x) {
                    None if x <= vertices[0][0] => vertices[0][1],
                    None => vertices[vertices.len() - 1][1],
                    Some(k) => {
                        let [x0, y0] = vertices[k];
                        let [x1, y1] = vertices[k + 1];
                        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                    }
                }
            }
        }
    }

    /// `d curve / dx`; for a polyline, the slope of the segment containing
    /// `x` (the right one at a vertex) and zero outside.
    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            Interface::Flat { .. } => 0.0,
            Interface::Sine { amplitude, period, phase, .. } => {
                let w = 2.0 * PI / period;
                amplitude * w * (w * x + phase).cos()
            }
            Interface::Polyline { vertices } => match locate(vertices, x) {
                Some(k) => (vertices[k + 1][1] - vertices[k][1]) / (vertices[k + 1][0] - vertices[k][0]),
                None => 0.0,
            },
        }
    }
}

/// Segment index `k` with `x_k ≤ x < x_{k+1}`, if any.
fn locate(v: &[[f64; 2]], x: f64) -> Option<usize> {
    if v.len() < 2 || x < v[0][0] || x >= v[v.len() - 1][0] {
        return None;
    }
    let k = v.partition_point(|p| p[0] <= x) - 1;
    Some(k.min(v.len() - 2))
}

/// Vertical distance `y − curve(x)`: positive below the interface.
pub fn signed_distance(point: (f64, f64), interface: &Interface) -> f64 {
    point.1 - interface.depth_at(point.0)
}

/// Geodesic parameter `clamp(½ + dist / range, 0, 1)`; a step at `range = 0`.
pub fn blend_parameter(dist: f64, range: f64) -> f64 {
    if range > 0.0 {
        (0.5 + dist / range).clamp(0.0, 1.0)
    } else if dist > 0.0 {
        1.0
    } else if dist < 0.0 {
        0.0
    } else {
        0.5
    }
}
