//! Config ingestion, seeded sweeps and their flat-file output.

mod config;
mod sweeps;

pub use config::{
    load_config, logspace, parse_config, parse_number, AppConfig, EnergyConfig, ExperimentConfig, NetworkConfig,
    SweepConfig,
};
pub use sweeps::{
    calibrate_min_energy, cell_seed, draw_sources, episode_seed, feasible_instance, median, online_config,
    run_comparison, run_convergence, run_sensitivity, series_metrics, static_config, CellInstance, CellStatus,
    ComparisonRatio, ComparisonResult, ComparisonRow, ConvergenceResult, ConvergenceRow, SensitivityMean,
    SensitivityResult, SensitivityRow, SeriesMetrics, CALIBRATION_TOLERANCE, COMPARISON_SERIES_HEADER,
    SERIES_HEADER, SMOOTHING_WINDOW, STEADY_FRACTION, TRANSIENT_BAND,
};

use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    /// SHA-256 of the canonical config text.
    pub config_hash: String,
    pub config: String,
    pub files: Vec<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(experiment: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(cfg),
            config: cfg.canonical(),
            files: Vec::new(),
        }
    }
}

/// Writes `(name, contents)` pairs into `dir` followed by `manifest.json`.
pub fn write_outputs(dir: &Path, mut manifest: Manifest, files: &[(&str, &str)]) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
        manifest.files.push((*name).to_string());
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), json + "\n")
}
