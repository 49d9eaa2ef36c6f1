use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ava::ObservationScheme;
use crate::discretize::Grid2D;
use crate::error::{Error, Result};
use crate::inference::{BfgsOptions, BlendSearch};
use crate::prior::{HyperParams, Interface, ModelKind};

/// Generating model for the synthetic truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub kind: ModelKind,
    /// `scale` is `λ²` or `τ²`; `sigma2` is the noise variance used to
    /// generate observations.
    pub hyper: HyperParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_coarse")]
    pub coarse: usize,
}

fn default_coarse() -> usize {
    9
}

impl SearchConfig {
    pub fn to_search(&self) -> Result<BlendSearch> {
        let mut s = BlendSearch::new(self.lo, self.hi)?;
        s.coarse = self.coarse;
        s.validate()?;
        Ok(s)
    }
}

/// What is computed for each replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Study {
    /// Fit each model, krige, and score against the truth.
    Reconstruction { models: Vec<ModelKind> },
    /// Per-replicate maximum-likelihood estimates of one model.
    Identifiability { model: ModelKind },
    /// Blend range under a guessed interface, other parameters at the truth.
    BlendRange { guess: Interface, search: SearchConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_f_tol")]
    pub f_tol: f64,
    /// Starting point; defaults to the truth with zero correlations.
    #[serde(default)]
    pub init: Option<HyperParams>,
}

fn default_max_iter() -> usize {
    BfgsOptions::default().max_iter
}

fn default_grad_tol() -> f64 {
    BfgsOptions::default().grad_tol
}

fn default_f_tol() -> f64 {
    BfgsOptions::default().f_tol
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { max_iter: default_max_iter(), grad_tol: default_grad_tol(), f_tol: default_f_tol(), init: None }
    }
}

impl FitConfig {
    pub fn bfgs(&self) -> BfgsOptions {
        BfgsOptions { max_iter: self.max_iter, grad_tol: self.grad_tol, f_tol: self.f_tol, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub grid: Grid2D,
    pub truth: TruthConfig,
    pub observation: ObservationScheme,
    /// Observe without noise (`σ² = 0`).
    #[serde(default)]
    pub noise_free: bool,
    pub study: Study,
    #[serde(default)]
    pub fit: FitConfig,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Replicates whose fields and heatmaps are written.
    #[serde(default = "one")]
    pub write_fields: usize,
}

fn one() -> usize {
    1
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

impl ExperimentConfig {
    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(|e| config_error("grid", e.to_string()))?;
        self.truth.hyper.validate().map_err(|e| config_error("truth.hyper", e.to_string()))?;
        crate::prior::model_components(self.truth.kind, &self.truth.hyper, &self.grid)
            .map_err(|e| config_error("truth", e.to_string()))?;
        if self.replicates == 0 {
            return Err(config_error("replicates", "must be at least 1"));
        }
        if let ObservationScheme::Ava { config, .. } = &self.observation {
            if config.angles_deg.is_empty() {
                return Err(config_error("observation.config.angles_deg", "needs at least one angle"));
            }
        }
        match &self.study {
            Study::Reconstruction { models } => {
                if models.is_empty() {
                    return Err(config_error("study.models", "needs at least one model"));
                }
                if self.noise_free {
                    return Err(config_error("noise_free", "kriging needs noisy observations"));
                }
            }
            Study::Identifiability { .. } => {}
            Study::BlendRange { guess, search } => {
                guess.validate().map_err(|e| config_error("study.guess", e.to_string()))?;
                search.to_search().map_err(|e| config_error("study.search", e.to_string()))?;
                if self.truth.kind == ModelKind::Model1 {
                    return Err(config_error("truth.kind", "blend-range studies need an interface model"));
                }
                if self.noise_free {
                    return Err(config_error("noise_free", "kriging needs noisy observations"));
                }
            }
        }
        if !(self.fit.grad_tol > 0.0) || !(self.fit.f_tol >= 0.0) || self.fit.max_iter == 0 {
            return Err(config_error("fit", "tolerances must be positive and max_iter at least 1"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Deserialises JSON, reporting the location of the first offending key.
pub(crate) fn from_json<T: DeserializeOwned>(text: &str) -> std::result::Result<T, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        (if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = from_json(text).map_err(|(path, message)| Error::Config { path, message })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::{preset, PRESETS};

    #[test]
    fn presets_round_trip_and_validate() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let back = parse_config(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn unknown_key_names_path() {
        let mut v: serde_json::Value = serde_json::from_str(&preset("identity-λ0.5").unwrap().to_json()).unwrap();
        v["truth"]["hyper"]["kapa2"] = 1.0.into();
        match parse_config(&v.to_string()) {
            Err(Error::Config { path, message }) => {
                assert!(path.starts_with("truth.hyper"), "{path}");
                assert!(message.contains("kapa2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let mut cfg = preset("identity-λ0.5").unwrap();
        cfg.replicates = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "replicates"));
        let mut cfg = preset("identity-λ0.5").unwrap();
        cfg.truth.hyper.rho_below = None;
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }
}
