use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mvspde::ava::ObservationSet;
use mvspde::harness::{
    default_init, krige, load_config, preset, read_field, render_heatmap, run_experiment_to, setup, simulate,
    write_field, ExperimentConfig, FieldHeader, PRESETS,
};
use mvspde::inference::{fit_ml_with, relative_error_scoped, ErrorScope, FitOptions};
use mvspde::prior::{HyperParams, ModelKind};
use mvspde::{Error, Result};

#[derive(Parser)]
#[command(name = "mvspde", version, about = "Multivariate SPDE priors: simulate, fit, krige, run experiments")]
struct Cli {
    /// Experiment config (JSON file or preset name).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replicate loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one replicate of the truth and its observations.
    Simulate,
    /// Fit a model to one data set by maximum likelihood.
    Fit {
        /// Observations as a field file; simulated from the config if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model to fit; defaults to the config's truth model.
        #[arg(long)]
        model: Option<ModelArg>,
    },
    /// Posterior mean of the latent fields.
    Krige {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Hyperparameters JSON; defaults to the config truth.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        model: Option<ModelArg>,
    },
    /// Run a preset, or the `--config` file when no preset is named.
    /// `list` prints the presets.
    Experiment {
        preset: Option<String>,
        /// Print the resolved config as JSON instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Write a field file component as a grey-scale PGM or PNG.
    Render {
        field: PathBuf,
        #[arg(long, default_value_t = 0)]
        component: usize,
        /// Shared colour scale as `min,max`.
        #[arg(long, value_parser = parse_scale, allow_hyphen_values = true)]
        scale: Option<(f64, f64)>,
        /// Image path; `.png` selects PNG.
        #[arg(long)]
        image: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModelArg {
    M1,
    M2,
    M3,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::M1 => ModelKind::Model1,
            ModelArg::M2 => ModelKind::Model2,
            ModelArg::M3 => ModelKind::Model3,
        }
    }
}

fn parse_scale(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `min,max`")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let name = cli.config.as_deref().ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "this command needs --config <file or preset>".into(),
    })?;
    let mut cfg = if Path::new(name).exists() { load_config(Path::new(name))? } else { preset(name)? };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, fallback: &str) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(fallback));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn header(cfg: &ExperimentConfig, len: usize) -> FieldHeader {
    FieldHeader::new(cfg.grid.nx, cfg.grid.ny, len / cfg.grid.len())
}

/// Observations from `data`, or replicate 0 simulated from the config.
fn observations(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<(ObservationSet, Option<Vec<f64>>)> {
    let s = setup(cfg)?;
    match data {
        Some(p) => {
            let f = read_field(p)?;
            if f.data.len() != s.operator.n_obs() {
                return Err(Error::Argument(format!(
                    "{} holds {} values, the observation operator produces {}",
                    p.display(),
                    f.data.len(),
                    s.operator.n_obs()
                )));
            }
            let obs = ObservationSet { d: f.data, operator: s.operator.clone(), seed: cfg.seed, truth_ref: Some(p.display().to_string()) };
            Ok((obs, None))
        }
        None => {
            let sim = simulate(&s, cfg.seed, 0)?;
            Ok((sim.obs, Some(sim.truth)))
        }
    }
}

fn model_for(cfg: &ExperimentConfig, m: Option<ModelArg>) -> ModelKind {
    m.map(ModelKind::from).unwrap_or(cfg.truth.kind)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v).expect("serialisable") + "\n")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => {
            let cfg = config(cli)?;
            let dir = out_dir(cli, "out/simulate")?;
            let sim = simulate(&setup(&cfg)?, cfg.seed, 0)?;
            write_field(&dir.join("truth.bin"), &sim.truth, &header(&cfg, sim.truth.len()))?;
            write_field(&dir.join("obs.bin"), &sim.obs.d, &header(&cfg, sim.obs.d.len()))?;
            let n = cfg.grid.len();
            for k in 0..3 {
                let p = dir.join(format!("truth_f{}.pgm", k + 1));
                render_heatmap(&sim.truth[k * n..(k + 1) * n], cfg.grid.nx, cfg.grid.ny, &p, None)?;
            }
            println!("wrote {}", dir.display());
        }
        Command::Fit { data, model } => {
            let cfg = config(cli)?;
            let dir = out_dir(cli, "out/fit")?;
            let kind = model_for(&cfg, *model);
            let (obs, _) = observations(&cfg, data.as_deref())?;
            let init = cfg.fit.init.clone().unwrap_or_else(|| default_init(&cfg.truth.hyper, kind));
            let opts = FitOptions { bfgs: cfg.fit.bfgs(), per_replicate: false };
            let fit = fit_ml_with(std::slice::from_ref(&obs), kind, &cfg.grid, &init, &opts)?;
            write_json(&dir.join("params.json"), &fit.estimate)?;
            let summary = serde_json::json!({
                "model": kind.label(),
                "loglik": fit.loglik,
                "iterations": fit.iterations,
                "converged": fit.converged,
                "estimate": fit.estimate,
            });
            write_json(&dir.join("fit.json"), &summary)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serialisable"));
        }
        Command::Krige { data, params, model } => {
            let cfg = config(cli)?;
            let dir = out_dir(cli, "out/krige")?;
            let kind = model_for(&cfg, *model);
            let (obs, truth) = observations(&cfg, data.as_deref())?;
            let hyper: HyperParams = match params {
                Some(p) => {
                    let text = fs::read_to_string(p)?;
                    serde_json::from_str(&text).map_err(|e| Error::Parse { file: p.clone(), message: e.to_string() })?
                }
                None => cfg.truth.hyper.clone(),
            };
            let mean = krige(kind, &hyper, &cfg.grid, &obs)?;
            write_field(&dir.join("mean.bin"), &mean, &header(&cfg, mean.len()))?;
            let n = cfg.grid.len();
            render_heatmap(&mean[..n], cfg.grid.nx, cfg.grid.ny, &dir.join("mean_f1.pgm"), None)?;
            if let Some(t) = truth {
                let e = relative_error_scoped(&mean, &t, 3, ErrorScope::Field(0))?;
                println!("relative error (field 1): {e:.4}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Experiment { preset: name, print_config } => {
            if name.as_deref() == Some("list") {
                for p in PRESETS {
                    println!("{p}");
                }
                return Ok(());
            }
            let mut cfg = match name {
                Some(n) => preset(n)?,
                None => config(cli)?,
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if *print_config {
                println!("{}", cfg.to_json());
                return Ok(());
            }
            let fallback = format!("out/{}", cfg.name);
            let dir = match (&cli.out, &cfg.output_dir) {
                (Some(d), _) => d.clone(),
                (None, Some(d)) => d.clone(),
                (None, None) => PathBuf::from(fallback),
            };
            let m = run_experiment_to(&cfg, Some(&dir))?;
            for (k, v) in &m.summary {
                println!("{k}\t{v:.6}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Render { field, component, scale, image } => {
            let f = read_field(field)?;
            let data = f.component(*component)?;
            let path = image.clone().unwrap_or_else(|| {
                let base = cli.out.clone().unwrap_or_else(|| field.parent().map(Path::to_path_buf).unwrap_or_default());
                let stem = field.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_else(|| "field".into());
                base.join(format!("{stem}_f{}.pgm", component + 1))
            });
            render_heatmap(data, f.header.nx, f.header.ny, &path, *scale)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
