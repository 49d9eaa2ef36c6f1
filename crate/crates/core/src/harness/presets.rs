use crate::ava::{AvaConfig, ObservationScheme};
use crate::discretize::Grid2D;
use crate::error::{Error, Result};
use crate::prior::{AnisotropySpec, HyperParams, Interface, ModelKind, PriorScale};

use super::config::{ExperimentConfig, FitConfig, SearchConfig, Study, TruthConfig};

pub const PRESETS: &[&str] = &[
    "identity-λ50",
    "identity-λ0.5",
    "ava-λ0.5",
    "ava-λ20",
    "nonstat-identity-λ0.2",
    "blend-range-sine-full",
    "blend-range-sine-half",
    "identifiability-direct",
    "identifiability-indirect",
];

const SEED: u64 = 20_190_601;
const DEPTH: f64 = 32.0;
const KAPPA2: f64 = 0.1;

/// Looser than the library default: the last iterations of the reconstruction
/// fits move the log-likelihood by well under one unit.
const RECONSTRUCTION_F_TOL: f64 = 1e-6;

fn grid() -> Grid2D {
    Grid2D { nx: 64, ny: 64, h: 1.0 }
}

fn two_layer(scale: PriorScale, above: [f64; 3], below: [f64; 3]) -> HyperParams {
    let mut h = HyperParams::new(KAPPA2, scale);
    h.rho_above = above;
    h.rho_below = Some(below);
    h.interface = Some(Interface::Flat { depth: DEPTH });
    h
}

const STRONG_ABOVE: [f64; 3] = [0.99, 0.99, 0.99];
const STRONG_BELOW: [f64; 3] = [-0.99, -0.99, 0.99];

fn reconstruction(name: &str, truth: TruthConfig, observation: ObservationScheme, models: Vec<ModelKind>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        grid: grid(),
        truth,
        observation,
        noise_free: false,
        study: Study::Reconstruction { models },
        fit: FitConfig { f_tol: RECONSTRUCTION_F_TOL, ..Default::default() },
        replicates: 20,
        seed: SEED,
        output_dir: None,
        write_fields: 1,
    }
}

fn ava() -> ObservationScheme {
    ObservationScheme::Ava { config: AvaConfig::default(), wavelet: None }
}

fn blend_range(name: &str, period: f64) -> ExperimentConfig {
    let mut hyper = two_layer(PriorScale::Lambda2(0.5), STRONG_ABOVE, STRONG_BELOW);
    hyper.interface = Some(Interface::Sine { baseline: DEPTH, amplitude: 23.0, period, phase: 0.0 });
    ExperimentConfig {
        name: name.into(),
        grid: grid(),
        truth: TruthConfig { kind: ModelKind::Model2, hyper },
        observation: ObservationScheme::Identity,
        noise_free: false,
        study: Study::BlendRange {
            guess: Interface::Flat { depth: DEPTH },
            search: SearchConfig { lo: 0.0, hi: 64.0, coarse: 9 },
        },
        fit: FitConfig::default(),
        replicates: 30,
        seed: SEED,
        output_dir: None,
        write_fields: 1,
    }
}

fn identifiability(name: &str, hyper: HyperParams, noise_free: bool, replicates: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        grid: grid(),
        truth: TruthConfig { kind: ModelKind::Model2, hyper },
        observation: ObservationScheme::Identity,
        noise_free,
        study: Study::Identifiability { model: ModelKind::Model2 },
        fit: FitConfig::default(),
        replicates,
        seed: SEED,
        output_dir: None,
        write_fields: 1,
    }
}

/// Preset by name. `l` may stand in for `λ`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let key = name.replace("-l", "-λ");
    let cfg = match key.as_str() {
        "identity-λ50" | "identity-λ0.5" => {
            let l2 = if key.ends_with("50") { 50.0 } else { 0.5 };
            let truth = TruthConfig { kind: ModelKind::Model2, hyper: two_layer(PriorScale::Lambda2(l2), STRONG_ABOVE, STRONG_BELOW) };
            reconstruction(&key, truth, ObservationScheme::Identity, vec![ModelKind::Model2, ModelKind::Model1])
        }
        "ava-λ0.5" | "ava-λ20" => {
            let l2 = if key.ends_with("20") { 20.0 } else { 0.5 };
            let truth = TruthConfig { kind: ModelKind::Model2, hyper: two_layer(PriorScale::Lambda2(l2), STRONG_ABOVE, STRONG_BELOW) };
            reconstruction(&key, truth, ava(), vec![ModelKind::Model2, ModelKind::Model1])
        }
        "nonstat-identity-λ0.2" => {
            let mut hyper = two_layer(PriorScale::Lambda2(0.2), STRONG_ABOVE, STRONG_BELOW);
            hyper.interface = Some(Interface::Sine { baseline: DEPTH, amplitude: 8.0, period: 64.0, phase: 0.0 });
            hyper.blend_range = 6.0;
            hyper.anisotropy = Some(AnisotropySpec::default());
            let truth = TruthConfig { kind: ModelKind::Model3, hyper };
            reconstruction(&key, truth, ObservationScheme::Identity, vec![ModelKind::Model3, ModelKind::Model1])
        }
        "blend-range-sine-full" => blend_range(&key, 64.0),
        "blend-range-sine-half" => blend_range(&key, 128.0),
        "identifiability-direct" => {
            let hyper = two_layer(PriorScale::Tau2(50.0), [0.7, 0.2, 0.4], [0.7, -0.9, -0.85]);
            identifiability(&key, hyper, true, 50)
        }
        "identifiability-indirect" => {
            let hyper = two_layer(PriorScale::Lambda2(50.0), [0.7, 0.6, 0.95], [0.75, -0.9, -0.85]);
            identifiability(&key, hyper, false, 20)
        }
        _ => {
            return Err(Error::Config {
                path: "preset".into(),
                message: format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")),
            })
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_alias() {
        assert_eq!(preset("identity-l0.5").unwrap(), preset("identity-λ0.5").unwrap());
        assert!(preset("nope").is_err());
    }
}
