use std::path::Path;

use sagin_sim::config::{ExperimentConfig, Scheme};
use sagin_sim::export::{export_run, read_csv};
use sagin_sim::harness::{run_experiment, RunOptions};
use sagin_sim::scenario::Scenario;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.nodes.devices = 6;
    cfg.nodes.air_nodes = 2;
    cfg.data.train = 3000;
    cfg.data.test = 500;
    cfg.rounds = 6;
    cfg.target_accuracy = None;
    cfg
}

#[test]
fn shipped_default_config_matches_code_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
}

#[test]
fn same_seed_gives_identical_runs() {
    let a = run_experiment(&Scenario::new(small()).unwrap(), Scheme::Proposed, RunOptions::default()).unwrap();
    let b = run_experiment(&Scenario::new(small()).unwrap(), Scheme::Proposed, RunOptions::default()).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.params, b.params);
    assert_eq!(a.ledger, b.ledger);
}

#[test]
fn different_seeds_differ() {
    let mut cfg = small();
    let a = run_experiment(&Scenario::new(cfg.clone()).unwrap(), Scheme::Proposed, RunOptions::default()).unwrap();
    cfg.seed += 1;
    let b = run_experiment(&Scenario::new(cfg).unwrap(), Scheme::Proposed, RunOptions::default()).unwrap();
    assert_ne!(a.params, b.params);
}

#[test]
fn static_matches_proposed_in_the_first_round_only() {
    let sc = Scenario::new(small()).unwrap();
    let opts = RunOptions { train: false, stop_at_target: false };
    let p = run_experiment(&sc, Scheme::Proposed, opts).unwrap();
    let s = run_experiment(&sc, Scheme::Static, opts).unwrap();
    let strip = |r: &sagin_sim::harness::RoundReport| {
        let mut r = r.clone();
        r.scheme = Scheme::Proposed;
        r
    };
    assert_eq!(strip(&s.reports[0]), p.reports[0]);
    assert!(s.reports[1..].iter().all(|r| r.space_moved == 0.0 && r.device_moved == 0.0 || r.evacuated));
}

#[test]
fn no_offload_never_moves_data() {
    let sc = Scenario::new(small()).unwrap();
    let out = run_experiment(&sc, Scheme::NoOffload, RunOptions { train: false, stop_at_target: false }).unwrap();
    let first = &out.reports[0];
    assert!(out.reports.iter().all(|r| r.ground_samples == first.ground_samples && r.space_samples == 0));
}

#[test]
fn exported_csv_reads_back() {
    let cfg = small();
    let out = run_experiment(&Scenario::new(cfg.clone()).unwrap(), Scheme::AirOnly, RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = export_run(&cfg, &out, dir.path()).unwrap();
    let back = read_csv(std::fs::File::open(csv).unwrap()).unwrap();
    assert_eq!(back, out.reports);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert_eq!(manifest["rounds_run"], out.reports.len());
}

#[test]
fn training_improves_accuracy() {
    let out = run_experiment(&Scenario::new(small()).unwrap(), Scheme::Proposed, RunOptions::default()).unwrap();
    let first = out.reports.first().unwrap().accuracy;
    let last = out.reports.last().unwrap().accuracy;
    assert!(last > first, "{first} -> {last}");
}
