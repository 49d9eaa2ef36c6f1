//! Linearised AVA forward model: angle-dependent reflectivity mixing of the
//! three elastic contrasts followed by per-trace wavelet convolution.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretize::Grid2D;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvaConfig {
    /// Reflection angles in degrees.
    pub angles_deg: Vec<f64>,
    /// Background `(v_S / v_P)²`.
    pub gamma2: f64,
}

impl Default for AvaConfig {
    fn default() -> Self {
        AvaConfig { angles_deg: vec![0.0, 10.0, 20.0, 30.0], gamma2: 0.25 }
    }
}

impl AvaConfig {
    pub fn angles_rad(&self) -> Vec<f64> {
        self.angles_deg.iter().map(|a| a.to_radians()).collect()
    }
}

/// `(c1, c2, c3)` with `r_PP = c1 m1 + c2 m2 + c3 m3`.
pub fn reflectivity_coefficients(theta: f64, gamma2: f64) -> Result<[f64; 3]> {
    if !(0.0..PI / 2.0).contains(&theta) {
        return Err(Error::arg(format!("reflection angle {theta} rad outside [0, π/2)")));
    }
    if !(gamma2 >= 0.0) {
        return Err(Error::arg(format!("gamma2 must be non-negative, got {gamma2}")));
    }
    let t = theta.tan();
    let s2 = theta.sin().powi(2);
    Ok([0.5 * (1.0 + t * t), -4.0 * gamma2 * s2, 0.5 * (1.0 - 4.0 * gamma2 * s2)])
}

/// Sampled source pulse; `samples[peak_index]` sits at zero lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wavelet {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub peak_index: usize,
}

impl Wavelet {
    /// Single unit sample: convolution becomes the identity.
    pub fn impulse() -> Self {
        Wavelet { samples: vec![1.0], dt: 1.0, peak_index: 0 }
    }

    /// Value at integer lag `t`, zero outside the support.
    pub fn at(&self, t: isize) -> f64 {
        let k = t + self.peak_index as isize;
        if k < 0 || k as usize >= self.samples.len() {
            0.0
        } else {
            self.samples[k as usize]
        }
    }

    pub fn lags(&self) -> std::ops::RangeInclusive<isize> {
        -(self.peak_index as isize)..=(self.samples.len() - 1 - self.peak_index) as isize
    }
}

/// Ricker pulse `(1 − 2π²f²t²) exp(−π²f²t²)` on `t = −halfwidth..=halfwidth`.
pub fn ricker_wavelet(peak_freq: f64, halfwidth: usize) -> Result<Wavelet> {
    if !(peak_freq > 0.0) || halfwidth == 0 {
        return Err(Error::arg(format!(
            "ricker wavelet needs a positive frequency and halfwidth, got ({peak_freq}, {halfwidth})"
        )));
    }
    let a = (PI * peak_freq).powi(2);
    let samples = (-(halfwidth as isize)..=halfwidth as isize)
        .map(|t| {
            let t2 = (t * t) as f64;
            (1.0 - 2.0 * a * t2) * (-a * t2).exp()
        })
        .collect();
    Ok(Wavelet { samples, dt: 1.0, peak_index: halfwidth })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveletSpec {
    Ricker { peak_freq: f64, halfwidth: usize },
    Impulse,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        WaveletSpec::Ricker { peak_freq: 0.15, halfwidth: 12 }
    }
}

impl WaveletSpec {
    pub fn build(&self) -> Result<Wavelet> {
        match *self {
            WaveletSpec::Ricker { peak_freq, halfwidth } => ricker_wavelet(peak_freq, halfwidth),
            WaveletSpec::Impulse => Ok(Wavelet::impulse()),
        }
    }
}

/// How the latent fields are observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationScheme {
    Identity,
    Ava {
        #[serde(default)]
        config: AvaConfig,
        #[serde(default)]
        wavelet: Option<WaveletSpec>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationKind {
    Identity,
    Ava,
}

/// `G` of `d = G m + ε`, with `ε ~ N(0, σ² I)`.
#[derive(Clone, Debug)]
pub struct ObservationOperator {
    pub g: SparseMatrix,
    pub kind: ObservationKind,
    pub sigma2: f64,
    gtg: SparseMatrix,
}

impl ObservationOperator {
    pub fn new(g: SparseMatrix, kind: ObservationKind, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::arg(format!("noise variance must be non-negative, got {sigma2}")));
        }
        let gtg = match kind {
            ObservationKind::Identity if g.nrows() == g.ncols() => SparseMatrix::identity(g.ncols()),
            _ => g.gram(),
        };
        Ok(ObservationOperator { g, kind, sigma2, gtg })
    }

    /// `GᵀG`, computed once.
    pub fn gtg(&self) -> &SparseMatrix {
        &self.gtg
    }

    pub fn n_obs(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_latent(&self) -> usize {
        self.g.ncols()
    }

    /// Direct, noise-free observation of the latent field.
    pub fn is_direct(&self) -> bool {
        self.kind == ObservationKind::Identity && self.sigma2 == 0.0
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Self {
        ObservationOperator { sigma2, ..self.clone() }
    }
}

/// Per-trace depth convolution on the grid, zero-padded at both ends.
pub fn convolution_matrix(grid: &Grid2D, wavelet: &Wavelet) -> Result<SparseMatrix> {
    let mut trip = Vec::with_capacity(grid.len() * wavelet.samples.len());
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx {
            let row = grid.index(i, j as usize);
            for lag in wavelet.lags() {
                let l = j - lag;
                if l >= 0 && (l as usize) < grid.ny {
                    trip.push((row, grid.index(i, l as usize), wavelet.at(lag)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(grid.len(), grid.len(), &trip)
}

/// Builds `G` for three stacked fields. AVA rows are angle-major: block row
/// `k` is `[c1(θ_k) C, c2(θ_k) C, c3(θ_k) C]`.
pub fn assemble_observation_operator(
    grid: &Grid2D,
    scheme: &ObservationScheme,
    wavelet: Option<&Wavelet>,
    sigma2: f64,
) -> Result<ObservationOperator> {
    let n = grid.len();
    match scheme {
        ObservationScheme::Identity => {
            ObservationOperator::new(SparseMatrix::identity(3 * n), ObservationKind::Identity, sigma2)
        }
        ObservationScheme::Ava { config, .. } => {
            let wavelet = wavelet.ok_or_else(|| Error::arg("AVA observations need a wavelet"))?;
            if config.angles_deg.is_empty() {
                return Err(Error::arg("AVA observations need at least one angle"));
            }
            let c = convolution_matrix(grid, wavelet)?;
            let mut scaled = Vec::new();
            for theta in config.angles_rad() {
                let coef = reflectivity_coefficients(theta, config.gamma2)?;
                scaled.push(coef.map(|ck| c.scale(ck)));
            }
            let blocks: Vec<Vec<Option<&SparseMatrix>>> =
                scaled.iter().map(|row| row.iter().map(Some).collect()).collect();
            let g = SparseMatrix::from_blocks(&blocks, &vec![n; scaled.len()], &[n, n, n])?;
            ObservationOperator::new(g, ObservationKind::Ava, sigma2)
        }
    }
}

/// Observed data with the operator that produced it.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    pub d: Vec<f64>,
    pub operator: Arc<ObservationOperator>,
    pub seed: u64,
    pub truth_ref: Option<String>,
}

/// `d = G m + ε`, noise drawn from a ChaCha20 stream seeded with `seed`.
pub fn observe(op: &Arc<ObservationOperator>, m: &[f64], seed: u64) -> Result<ObservationSet> {
    let mut d = op.g.mul_vec(m)?;
    if op.sigma2 > 0.0 {
        let sd = op.sigma2.sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for v in d.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += sd * e;
        }
    }
    Ok(ObservationSet { d, operator: op.clone(), seed, truth_ref: None })
}
