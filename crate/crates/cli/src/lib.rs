//! Experiment harness around `grevf-core`: TOML configs, CSV data, JSON reports.

pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ExperimentConfig, Mode};
pub use data::{load_dataset, load_feature_table, write_predictions};
pub use error::{CliError, Result};
pub use report::Report;
pub use run::run_experiment;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Loads the config and dataset, runs, and writes the report (and the
/// predictions CSV when configured). Returns the report path.
pub fn fit(config_path: &Path, overrides: &Overrides) -> Result<PathBuf> {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::load(config_path)?;
    cfg.resolve_nodes()?;
    if let Some(seed) = overrides.seed {
        cfg.optimizer.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.output = Some(out.clone());
    }
    let out = cfg
        .output
        .clone()
        .unwrap_or_else(|| config_path.with_extension("report.json"));
    cfg.validate()?;

    let ds = load_dataset(&cfg.dataset, &cfg.interval()?, cfg.noise_variance)?;
    let mut report = run_experiment(&cfg, &ds)?;
    report
        .timings
        .insert("total_seconds".into(), start.elapsed().as_secs_f64());
    if let Some(p) = &cfg.predictions {
        write_predictions(p, &report.predictions)?;
    }
    report.write(&out)?;
    log::info!("report written to {}", out.display());
    Ok(out)
}
