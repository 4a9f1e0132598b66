//! Checks the convergence bound on quadratic tasks with exact constants.

use anyhow::Result;
use rayon::prelude::*;
use sagin_core::diagnostics::{
    federated_trajectory, max_learning_rate, quadratic_constants, synthetic_quadratic, convergence_bound,
    ConvergenceConstants,
};
use sagin_core::flcore::{BatchPolicy, LocalTrainConfig};
use sagin_core::ledger::SampleId;
use serde::{Deserialize, Serialize};

use crate::config::ValidateConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub constants: ConvergenceConstants,
    pub learning_rate_cap: f64,
    pub learning_rate: f64,
    pub bound: f64,
    pub statistic: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidateConfig,
    pub seeds: Vec<SeedResult>,
    pub passed: usize,
    pub pass: bool,
}

/// Label-style split: node `i` gets the `i`-th contiguous block, so each
/// node sees one group of centres.
pub fn contiguous_nodes(samples: usize, nodes: usize) -> Vec<Vec<SampleId>> {
    (0..nodes).map(|i| ((i * samples / nodes) as SampleId..((i + 1) * samples / nodes) as SampleId).collect()).collect()
}

pub fn check_seed(cfg: &ValidateConfig, seed: u64) -> Result<SeedResult> {
    let task = synthetic_quadratic(cfg.dim, cfg.samples, cfg.nodes, seed);
    let nodes = contiguous_nodes(cfg.samples, cfg.nodes);
    let train = LocalTrainConfig { local_iterations: cfg.local_iterations, batch_policy: BatchPolicy::DatasetOverH };
    let constants = quadratic_constants(&task, &nodes, &train);
    let cap = max_learning_rate(&constants, cfg.local_iterations);
    let eta = cap;
    let schedule = vec![eta; cfg.rounds];
    let w0: Vec<f64> = (0..cfg.dim).map(|i| 5.0 * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let traj = federated_trajectory(&task, &nodes, w0, &train, &schedule, constants.delta2, seed)?;
    let bound = convergence_bound(&constants, traj.f0, cfg.local_iterations, &traj.rounds);
    Ok(SeedResult {
        seed,
        constants,
        learning_rate_cap: cap,
        learning_rate: eta,
        bound,
        statistic: traj.statistic,
        pass: traj.statistic <= bound,
    })
}

pub fn run_validation(cfg: &ValidateConfig) -> Result<ValidationReport> {
    let seeds: Vec<SeedResult> = (0..cfg.seeds).into_par_iter().map(|s| check_seed(cfg, s)).collect::<Result<_>>()?;
    let passed = seeds.iter().filter(|s| s.pass).count();
    Ok(ValidationReport { config: cfg.clone(), pass: passed == seeds.len(), passed, seeds })
}
