//! Runs a shrunken copy of a preset study and prints its summary. Pass a
//! preset name to pick the study; `--full` keeps the preset's size.
//!
//! Usage: `cargo run --release --example run_experiment -- [preset] [--full]`

use mvspde::discretize::Grid2D;
use mvspde::harness::{preset, run_experiment_to, Study};
use mvspde::prior::Interface;

fn main() -> mvspde::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.iter().find(|a| !a.starts_with("--")).map(String::as_str).unwrap_or("identity-λ50");
    let mut cfg = preset(name)?;
    if !args.iter().any(|a| a == "--full") {
        shrink(&mut cfg);
    }
    let out = std::path::PathBuf::from(format!("out/{}", cfg.name));
    println!("config hash inputs:\n{}", cfg.to_json());
    let manifest = run_experiment_to(&cfg, Some(&out))?;
    for (k, v) in &manifest.summary {
        println!("{k:<32} {v:>12.5}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// 32×32 grid, 4 replicates, geometry halved to match.
fn shrink(cfg: &mut mvspde::harness::ExperimentConfig) {
    cfg.grid = Grid2D { nx: 32, ny: 32, h: 1.0 };
    cfg.replicates = 4;
    let halve = |i: &mut Interface| match i {
        Interface::Flat { depth } => *depth /= 2.0,
        Interface::Sine { baseline, amplitude, period, .. } => {
            *baseline /= 2.0;
            *amplitude /= 2.0;
            *period /= 2.0;
        }
        Interface::Polyline { vertices } => vertices.iter_mut().for_each(|v| *v = [v[0] / 2.0, v[1] / 2.0]),
    };
    if let Some(i) = cfg.truth.hyper.interface.as_mut() {
        halve(i);
    }
    cfg.truth.hyper.blend_range /= 2.0;
    if let Study::BlendRange { guess, search } = &mut cfg.study {
        halve(guess);
        search.hi /= 2.0;
    }
}
