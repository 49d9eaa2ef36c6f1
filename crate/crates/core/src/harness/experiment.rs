use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Study};
use super::field_io::{write_field, FieldHeader};
use super::manifest::{config_hash, write_table, RunManifest};
use super::render::{render_heatmap, shared_scale};
use crate::ava::{assemble_observation_operator, observe, ObservationOperator, ObservationScheme, ObservationSet};
use crate::discretize::Grid2D;
use crate::error::Result;
use crate::inference::{
    count_modes, estimate_blend_range, fit_ml_with, gaussian_kde, posterior_mean, relative_error, relative_error_scoped,
    sample_gmrf, silverman_bandwidth, ErrorScope, Factorization, FitOptions, FitResult,
};
use crate::prior::{build_model, HyperParams, ModelKind, PriorScale};

/// Seed for stream `stream` of replicate `r` (SplitMix64 finaliser).
pub fn replicate_seed(seed: u64, r: usize, stream: u64) -> u64 {
    let mut z = seed ^ ((r as u64) << 8 | stream).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Truth model factor and observation operator shared by all replicates.
pub struct Setup {
    pub grid: Grid2D,
    pub factor: Factorization,
    pub operator: Arc<ObservationOperator>,
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let mut truth = cfg.truth.hyper.clone();
    truth.scale = PriorScale::Tau2(truth.tau2());
    let model = build_model(cfg.truth.kind, &truth, &cfg.grid)?;
    let factor = Factorization::new(model.q())?;
    let sigma2 = if cfg.noise_free { 0.0 } else { cfg.truth.hyper.sigma2 };
    let wavelet = match &cfg.observation {
        ObservationScheme::Ava { wavelet, .. } => Some(wavelet.clone().unwrap_or_default().build()?),
        ObservationScheme::Identity => None,
    };
    let op = assemble_observation_operator(&cfg.grid, &cfg.observation, wavelet.as_ref(), sigma2)?;
    Ok(Setup { grid: cfg.grid, factor, operator: Arc::new(op) })
}

/// Latent truth and data for one replicate.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub truth: Vec<f64>,
    pub obs: ObservationSet,
}

pub fn simulate(setup: &Setup, seed: u64, r: usize) -> Result<Simulation> {
    let truth = sample_gmrf(&setup.factor, replicate_seed(seed, r, 0));
    let mut obs = observe(&setup.operator, &truth, replicate_seed(seed, r, 1))?;
    obs.truth_ref = Some(format!("replicate {r}"));
    Ok(Simulation { truth, obs })
}

/// Starting point for fitting `kind`: the truth with zero correlations.
pub fn default_init(truth: &HyperParams, kind: ModelKind) -> HyperParams {
    let mut h = truth.clone();
    h.rho_above = [0.0; 3];
    h.rho_below = if kind == ModelKind::Model1 { None } else { Some([0.0; 3]) };
    h
}

/// Posterior mean under fitted hyperparameters.
pub fn krige(kind: ModelKind, hyper: &HyperParams, grid: &Grid2D, obs: &ObservationSet) -> Result<Vec<f64>> {
    let mut h = hyper.clone();
    h.scale = PriorScale::Tau2(h.tau2());
    let model = build_model(kind, &h, grid)?;
    let obs = ObservationSet { operator: Arc::new(obs.operator.with_sigma2(h.sigma2)), ..obs.clone() };
    Ok(posterior_mean(model.q(), &obs)?.mean)
}

struct Outcome {
    row: Vec<f64>,
    fields: Vec<(String, Vec<f64>)>,
    seconds: f64,
}

fn fit_one(cfg: &ExperimentConfig, kind: ModelKind, obs: &ObservationSet) -> Result<FitResult> {
    let init = cfg.fit.init.clone().unwrap_or_else(|| default_init(&cfg.truth.hyper, kind));
    let opts = FitOptions { bfgs: cfg.fit.bfgs(), per_replicate: false };
    fit_ml_with(std::slice::from_ref(obs), kind, &cfg.grid, &init, &opts)
}

fn columns(cfg: &ExperimentConfig) -> Vec<String> {
    match &cfg.study {
        Study::Reconstruction { models } => models
            .iter()
            .flat_map(|m| {
                let l = m.label();
                ["err", "err_joint", "kappa2", "lambda2", "sigma2", "iterations", "converged"]
                    .map(|c| if c == "err" { format!("err_{l}") } else { format!("{c}_{l}") })
            })
            .collect(),
        Study::Identifiability { model } => {
            let mut c: Vec<String> = ["rho12_above", "rho13_above", "rho23_above"].map(String::from).to_vec();
            if *model != ModelKind::Model1 {
                c.extend(["rho12_below", "rho13_below", "rho23_below"].map(String::from));
            }
            c.extend(["kappa2", "tau2"].map(String::from));
            c
        }
        Study::BlendRange { .. } => ["range", "loglik", "err_guess", "err_blend", "improvement"].map(String::from).to_vec(),
    }
}

fn replicate(cfg: &ExperimentConfig, setup: &Setup, r: usize) -> Result<Outcome> {
    let start = Instant::now();
    let sim = simulate(setup, cfg.seed, r)?;
    let keep = r < cfg.write_fields;
    let mut fields = Vec::new();
    if keep {
        fields.push(("truth".to_string(), sim.truth.clone()));
        fields.push(("obs".to_string(), sim.obs.d.clone()));
    }
    let grid = &cfg.grid;
    let row = match &cfg.study {
        Study::Reconstruction { models } => {
            let mut row = Vec::new();
            for &kind in models {
                let fit = fit_one(cfg, kind, &sim.obs)?;
                let mean = krige(kind, &fit.estimate, grid, &sim.obs)?;
                row.extend([
                    relative_error_scoped(&mean, &sim.truth, 3, ErrorScope::Field(0))?,
                    relative_error(&mean, &sim.truth)?,
                    fit.estimate.kappa2,
                    fit.estimate.lambda2(),
                    fit.estimate.sigma2,
                    fit.iterations as f64,
                    if fit.converged { 1.0 } else { 0.0 },
                ]);
                if keep {
                    fields.push((format!("mean_{}", kind.label()), mean));
                }
            }
            row
        }
        Study::Identifiability { model } => {
            let fit = fit_one(cfg, *model, &sim.obs)?;
            let e = &fit.estimate;
            let mut row = e.rho_above.to_vec();
            if *model != ModelKind::Model1 {
                row.extend(e.rho_below.unwrap_or([f64::NAN; 3]));
            }
            row.extend([e.kappa2, e.tau2()]);
            row
        }
        Study::BlendRange { guess, search } => {
            let mut fixed = cfg.truth.hyper.clone();
            fixed.scale = PriorScale::Tau2(fixed.tau2());
            fixed.interface = Some(guess.clone());
            fixed.blend_range = 0.0;
            let est = estimate_blend_range(&sim.obs, &fixed, cfg.truth.kind, grid, &search.to_search()?)?;
            let plain = krige(cfg.truth.kind, &fixed, grid, &sim.obs)?;
            let mut blended = fixed.clone();
            blended.blend_range = est.range;
            let mean = krige(cfg.truth.kind, &blended, grid, &sim.obs)?;
            let e0 = relative_error_scoped(&plain, &sim.truth, 3, ErrorScope::Field(0))?;
            let e1 = relative_error_scoped(&mean, &sim.truth, 3, ErrorScope::Field(0))?;
            if keep {
                fields.push(("mean_guess".to_string(), plain));
                fields.push(("mean_blend".to_string(), mean));
            }
            vec![est.range, est.loglik, e0, e1, e0 - e1]
        }
    };
    Ok(Outcome { row, fields, seconds: start.elapsed().as_secs_f64() })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn summarise(cfg: &ExperimentConfig, columns: &[String], rows: &[Vec<f64>]) -> BTreeMap<String, f64> {
    let mut s = BTreeMap::new();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    for (k, name) in columns.iter().enumerate() {
        let v = col(k);
        let m = mean(&v);
        s.insert(format!("mean_{name}"), m);
        if v.len() > 1 {
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            s.insert(format!("sd_{name}"), sd);
        }
    }
    s.insert("replicates".into(), rows.len() as f64);
    match &cfg.study {
        Study::Reconstruction { models } if models.len() >= 2 => {
            let (a, b) = (models[0].label(), models[1].label());
            let ka = columns.iter().position(|c| *c == format!("err_{a}")).expect("column");
            let kb = columns.iter().position(|c| *c == format!("err_{b}")).expect("column");
            let wins = rows.iter().filter(|r| r[ka] < r[kb]).count();
            s.insert(format!("count_err_{a}_lt_err_{b}"), wins as f64);
        }
        Study::BlendRange { guess, .. } => {
            let truth_iface = cfg.truth.hyper.interface.clone().expect("validated");
            let dev = (0..cfg.grid.nx)
                .map(|i| {
                    let x = i as f64 * cfg.grid.h;
                    (truth_iface.depth_at(x) - guess.depth_at(x)).abs()
                })
                .fold(0.0, f64::max);
            let covering = rows.iter().filter(|r| r[0] >= dev).count();
            s.insert("interface_deviation".into(), dev);
            s.insert("fraction_range_covering".into(), covering as f64 / rows.len() as f64);
        }
        Study::Identifiability { .. } => {
            for (k, name) in columns.iter().enumerate() {
                if let Some((_, dens)) = density(name, &col(k)) {
                    s.insert(format!("modes_{name}"), count_modes(&dens) as f64);
                }
            }
        }
        _ => {}
    }
    s
}

/// KDE on the valid domain of a parameter: `[-1, 1]` for correlations,
/// `[0, 2·max]` otherwise.
fn density(name: &str, samples: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let bw = silverman_bandwidth(samples).ok()?;
    let (lo, hi) = if name.starts_with("rho") {
        (-1.0, 1.0)
    } else {
        (0.0, 2.0 * samples.iter().cloned().fold(0.0, f64::max))
    };
    let pts: Vec<f64> = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect();
    let dens = gaussian_kde(samples, &pts, bw).ok()?;
    Some((pts, dens))
}

/// Runs every replicate and, when `out` is given, writes `manifest.json`,
/// `results.csv`, `timings.csv`, field files and heatmaps under it.
pub fn run_experiment_to(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunManifest> {
    cfg.validate()?;
    let setup = setup(cfg)?;
    let outcomes = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| replicate(cfg, &setup, r))
        .collect::<Result<Vec<Outcome>>>()?;
    let columns = columns(cfg);
    let rows: Vec<Vec<f64>> = outcomes.iter().map(|o| o.row.clone()).collect();
    let summary = summarise(cfg, &columns, &rows);
    let manifest = RunManifest {
        name: cfg.name.clone(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        config: cfg.clone(),
        columns,
        rows,
        summary,
        timings: outcomes.iter().map(|o| o.seconds).collect(),
    };
    if let Some(dir) = out {
        write_outputs(cfg, &manifest, &outcomes, dir)?;
    }
    Ok(manifest)
}

/// As [`run_experiment_to`], writing to `cfg.output_dir` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    run_experiment_to(cfg, cfg.output_dir.as_deref())
}

fn write_outputs(cfg: &ExperimentConfig, manifest: &RunManifest, outcomes: &[Outcome], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("fields"))?;
    fs::create_dir_all(dir.join("images"))?;
    manifest.write_json(&dir.join("manifest.json"))?;
    manifest.write_csv(&dir.join("results.csv"))?;
    manifest.write_timings(&dir.join("timings.csv"))?;
    let (nx, ny) = (cfg.grid.nx, cfg.grid.ny);
    let n = nx * ny;
    for (r, o) in outcomes.iter().enumerate() {
        let first: Vec<&[f64]> = o.fields.iter().filter(|(k, _)| k != "obs").map(|(_, v)| &v[..n]).collect();
        let scale = shared_scale(&first);
        for (name, data) in &o.fields {
            let stem = format!("rep{r:03}_{name}");
            let header = FieldHeader::new(nx, ny, data.len() / n);
            write_field(&dir.join("fields").join(format!("{stem}.bin")), data, &header)?;
            let s = if name == "obs" { None } else { scale };
            render_heatmap(&data[..n], nx, ny, &dir.join("images").join(format!("{stem}_f1.pgm")), s)?;
        }
    }
    if let Study::Identifiability { .. } = cfg.study {
        let mut cols = Vec::new();
        let mut table: Vec<Vec<f64>> = vec![Vec::new(); 201];
        for name in &manifest.columns {
            if let Some((pts, dens)) = density(name, &manifest.column(name).expect("column")) {
                cols.push(format!("{name}_x"));
                cols.push(format!("{name}_density"));
                for (k, row) in table.iter_mut().enumerate() {
                    row.push(pts[k]);
                    row.push(dens[k]);
                }
            }
        }
        if !cols.is_empty() {
            write_table(&dir.join("densities.csv"), &cols, &table)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::preset;

    fn small(name: &str) -> ExperimentConfig {
        let mut cfg = preset(name).unwrap();
        cfg.grid = Grid2D { nx: 10, ny: 10, h: 1.0 };
        cfg.replicates = 2;
        cfg.fit.max_iter = 5;
        let shrink = |i: &mut crate::prior::Interface| {
            if let crate::prior::Interface::Flat { depth } = i {
                *depth = 5.0;
            }
            if let crate::prior::Interface::Sine { baseline, amplitude, period, .. } = i {
                *baseline = 5.0;
                *amplitude = 3.0;
                *period = 10.0;
            }
        };
        if let Some(i) = cfg.truth.hyper.interface.as_mut() {
            shrink(i);
        }
        if let Study::BlendRange { guess, search } = &mut cfg.study {
            shrink(guess);
            search.hi = 8.0;
        }
        cfg
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(replicate_seed(1, 0, 0), replicate_seed(1, 0, 1));
        assert_ne!(replicate_seed(1, 0, 0), replicate_seed(1, 1, 0));
        assert_ne!(replicate_seed(1, 0, 0), replicate_seed(2, 0, 0));
    }

    #[test]
    fn reconstruction_runs_and_is_deterministic() {
        let cfg = small("identity-λ0.5");
        let dir = tempfile::tempdir().unwrap();
        let a = run_experiment_to(&cfg, Some(dir.path())).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert!(a.summary.contains_key("mean_err_M2") && a.summary.contains_key("count_err_M2_lt_err_M1"));
        let first = fs::read(dir.path().join("manifest.json")).unwrap();
        let field = fs::read(dir.path().join("fields/rep000_mean_M2.bin")).unwrap();
        run_experiment_to(&cfg, Some(dir.path())).unwrap();
        assert_eq!(first, fs::read(dir.path().join("manifest.json")).unwrap());
        assert_eq!(field, fs::read(dir.path().join("fields/rep000_mean_M2.bin")).unwrap());
        let (cols, rows) = crate::harness::manifest::read_table(&dir.path().join("results.csv")).unwrap();
        assert_eq!((cols, rows), (a.columns.clone(), a.rows.clone()));
    }

    #[test]
    fn identifiability_table_has_eight_columns() {
        let cfg = small("identifiability-direct");
        let m = run_experiment_to(&cfg, None).unwrap();
        assert_eq!(m.columns.len(), 8);
        assert!(m.rows.iter().all(|r| r.len() == 8 && r.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn blend_range_runs() {
        let cfg = small("blend-range-sine-full");
        let m = run_experiment_to(&cfg, None).unwrap();
        assert!(m.summary.contains_key("fraction_range_covering"));
        let dev = m.summary["interface_deviation"];
        assert!(dev > 2.5 && dev <= 3.0);
    }
}
