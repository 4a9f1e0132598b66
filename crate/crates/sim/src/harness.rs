//! The round loop: plan, move data, train, aggregate, advance the clock.

use anyhow::{bail, Result};
use rayon::prelude::*;
use sagin_core::flcore::{
    aggregate, evaluate, local_sgd, satellite_training_with_handover, steps_per_pass, Objective, SoftmaxRegression,
};
use sagin_core::latency::{space_layer_latency, SpaceLayerJob};
use sagin_core::ledger::{DatasetLedger, NodeId};
use sagin_core::math::norm_sq;
use sagin_core::rng::{purpose, stream};
use serde::{Deserialize, Serialize};

use crate::baselines::{apply, Planner};
use crate::config::Scheme;
use crate::scenario::Scenario;

/// One row of the per-round metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub scheme: Scheme,
    pub direction: String,
    pub evacuated: bool,
    pub within_budget: bool,
    pub space_moved: f64,
    pub device_moved: f64,
    pub tau_space: f64,
    pub tau_air_max: f64,
    pub tau_total: f64,
    pub max_comm_delay: f64,
    pub finishing_pass: usize,
    pub sim_time_s: f64,
    pub accuracy: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub ground_samples: usize,
    pub air_samples: usize,
    pub space_samples: usize,
    pub privacy_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Skip local training and evaluation; only plan and move data.
    pub train: bool,
    /// Overrides the config's stopping accuracy.
    pub stop_at_target: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { train: true, stop_at_target: true }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scheme: Scheme,
    pub reports: Vec<RoundReport>,
    pub params: Vec<f64>,
    pub ledger: DatasetLedger,
    pub initial_total: usize,
}

impl RunOutput {
    /// Simulated time at which test accuracy first reached `target`.
    pub fn time_to_accuracy(&self, target: f64) -> Option<f64> {
        self.reports.iter().find(|r| r.accuracy >= target).map(|r| r.sim_time_s)
    }
}

fn node_key(node: NodeId, devices: usize, air: usize) -> u64 {
    match node {
        NodeId::Ground(k) => k as u64,
        NodeId::Air(n) => (devices + n) as u64,
        NodeId::Space => (devices + air) as u64,
    }
}

pub fn run_experiment(scenario: &Scenario, scheme: Scheme, opts: RunOptions) -> Result<RunOutput> {
    let cfg = &scenario.cfg;
    let tol = cfg.tolerances();
    let train_cfg = cfg.local_train();
    let model = SoftmaxRegression::new(&scenario.train);
    let mut params = vec![0.0; model.param_count()];
    let mut ledger = scenario.initial_ledger()?;
    let initial_total = ledger.total();
    let mut planner = Planner::new(scheme);
    let space_cpu = 0.5 * (cfg.nodes.sat_cpu_min_hz + cfg.nodes.sat_cpu_max_hz);
    let (devices, air) = (ledger.device_count(), ledger.air_count());
    let mut clock = 0.0;
    let mut reports = Vec::new();

    for round in 0..cfg.rounds {
        let state = scenario.round_state(&ledger, clock)?;
        let planned = planner.plan(&state, tol, space_cpu);
        let tau = planned.latency.tau_total;
        if !tau.is_finite() {
            bail!("round {round} of {} has unbounded latency", scheme.name());
        }
        let mut rng = stream(cfg.seed, purpose::OFFLOAD, 0, round as u64);
        ledger = apply(&ledger, &planned.action, &mut rng)?;

        let eta = cfg.learning_rate(round);
        let (mut accuracy, mut loss, mut grad_norm) = (0.0, 0.0, 0.0);
        if opts.train {
            let total = ledger.total() as f64;
            let nodes: Vec<NodeId> = ledger.nodes().into_iter().filter(|&n| ledger.len(n) > 0).collect();
            let space_steps = if ledger.space.is_empty() {
                Vec::new()
            } else {
                let job = SpaceLayerJob {
                    samples: ledger.space.len() as f64,
                    passes: &state.passes,
                    payload: state.payload,
                    handover_payload: state.handover_payload,
                };
                // An evacuated or shifted space layer may not match the
                // passes exactly; fall back to a single pass.
                match space_layer_latency(&job) {
                    Ok(s) => steps_per_pass(&s.processed_per_pass, train_cfg.local_iterations),
                    Err(_) => vec![train_cfg.local_iterations],
                }
            };
            let trained: Vec<Result<(Vec<f64>, f64)>> = nodes
                .par_iter()
                .map(|&node| {
                    let ids = ledger.samples(node);
                    let rng = stream(cfg.seed, purpose::TRAIN, node_key(node, devices, air), round as u64);
                    let w = if node == NodeId::Space {
                        satellite_training_with_handover(&model, params.clone(), &ids, &train_cfg, eta, rng, &space_steps)?
                    } else {
                        local_sgd(&model, params.clone(), &ids, &train_cfg, eta, rng)?
                    };
                    Ok((w, ids.len() as f64 / total))
                })
                .collect();
            let trained: Vec<(Vec<f64>, f64)> = trained.into_iter().collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = trained.iter().map(|(w, _)| w.as_slice()).collect();
            let mut weights: Vec<f64> = trained.iter().map(|(_, l)| *l).collect();
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            let rest: f64 = weights.iter().skip(1).sum();
            weights[0] = 1.0 - rest;
            let next = aggregate(&refs, &weights)?;
            let step: Vec<f64> = next.iter().zip(&params).map(|(a, b)| a - b).collect();
            grad_norm = norm_sq(&step).sqrt() / (eta * train_cfg.local_iterations as f64);
            params = next;
            let m = evaluate(&params, &scenario.test);
            accuracy = m.accuracy;
            loss = m.loss;
        }

        clock += tau;
        let (space_moved, device_moved) = planned.action.moved();
        let lat = &planned.latency;
        reports.push(RoundReport {
            round,
            scheme,
            direction: planned.action.direction_label().to_string(),
            evacuated: planned.evacuated,
            within_budget: planned.within_budget,
            space_moved,
            device_moved,
            tau_space: lat.tau_space,
            tau_air_max: lat.air_side(),
            tau_total: tau,
            max_comm_delay: lat.max_comm_delay(),
            finishing_pass: lat.finishing_pass_index,
            sim_time_s: clock,
            accuracy,
            loss,
            grad_norm,
            ground_samples: (0..devices).map(|k| ledger.ground_len(k)).sum(),
            air_samples: ledger.air.iter().map(Vec::len).sum(),
            space_samples: ledger.space.len(),
            privacy_violations: ledger.privacy_violations(),
        });
        if opts.train && opts.stop_at_target {
            if let Some(target) = cfg.target_accuracy {
                if accuracy >= target {
                    break;
                }
            }
        }
    }
    Ok(RunOutput { scheme, reports, params, ledger, initial_total })
}
