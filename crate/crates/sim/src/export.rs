//! CSV metrics and the JSON run manifest. Output is a pure function of the
//! inputs, so reruns produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::harness::{RoundReport, RunOutput};

const HEADER: [&str; 20] = [
    "round",
    "scheme",
    "direction",
    "evacuated",
    "within_budget",
    "space_moved",
    "device_moved",
    "tau_space",
    "tau_air_max",
    "tau_total",
    "max_comm_delay",
    "finishing_pass",
    "sim_time_s",
    "accuracy",
    "loss",
    "grad_norm",
    "ground_samples",
    "air_samples",
    "space_samples",
    "privacy_violations",
];

/// The header is written even when `reports` is empty.
pub fn write_csv<W: std::io::Write>(reports: &[RoundReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<RoundReport>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize::<RoundReport>() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub scheme: String,
    pub sagin_core_version: String,
    pub sagin_sim_version: String,
    pub rounds_run: usize,
    pub final_accuracy: Option<f64>,
    pub time_to_target_s: Option<f64>,
    pub config: ExperimentConfig,
}

pub fn manifest(cfg: &ExperimentConfig, run: &RunOutput) -> Manifest {
    Manifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        scheme: run.scheme.name().to_string(),
        sagin_core_version: env!("CARGO_PKG_VERSION").to_string(),
        sagin_sim_version: env!("CARGO_PKG_VERSION").to_string(),
        rounds_run: run.reports.len(),
        final_accuracy: run.reports.last().map(|r| r.accuracy),
        time_to_target_s: cfg.target_accuracy.and_then(|t| run.time_to_accuracy(t)),
        config: cfg.clone(),
    }
}

/// Writes `<scheme>.csv` and `<scheme>.manifest.json` under `dir`.
pub fn export_run(cfg: &ExperimentConfig, run: &RunOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{}.csv", run.scheme.name()));
    let json_path = dir.join(format!("{}.manifest.json", run.scheme.name()));
    let file = fs::File::create(&csv_path)?;
    write_csv(&run.reports, file)?;
    let json = serde_json::to_string_pretty(&manifest(cfg, run))?;
    fs::write(&json_path, json + "\n")?;
    Ok((csv_path, json_path))
}
