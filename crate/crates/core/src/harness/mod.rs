//! Experiment configuration, presets, runs, and file output.

mod config;
mod experiment;
mod field_io;
mod manifest;
mod presets;
mod render;

pub use config::{load_config, parse_config, ExperimentConfig, FitConfig, SearchConfig, Study, TruthConfig};
pub use experiment::{
    default_init, krige, replicate_seed, run_experiment, run_experiment_to, setup, simulate, Setup, Simulation,
};
pub use field_io::{
    read_field, read_field_csv, sidecar_path, write_field, write_field_csv, FieldFile, FieldHeader, DTYPE, ORDERING,
};
pub use manifest::{config_hash, read_table, write_table, RunManifest};
pub use presets::{preset, PRESETS};
pub use render::{render_heatmap, shared_scale, to_gray};
