use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sagin_core::latency::RoundState;
use sagin_core::offload::optimize_round;
use sagin_sim::config::{ExperimentConfig, Scheme};
use sagin_sim::coverage::{serving_chain, CoverageCache};
use sagin_sim::export::export_run;
use sagin_sim::harness::{run_experiment, RunOptions};
use sagin_sim::scenario::Scenario;
use sagin_sim::validate::run_validation;

#[derive(Parser)]
#[command(name = "sagin", version, about = "Federated learning over a ground, air and space network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run training rounds and write per-round CSV plus a JSON manifest.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// A scheme name, or `all`.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Solve one round from a JSON state and print the plan.
    Optimize {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Repeat `simulate` over values of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of alpha, sat-cpu, air-cpu, devices.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the convergence bound on quadratic tasks.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the serving satellites from a given time.
    Passes {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

fn load(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => {
            let cfg = ExperimentConfig::default();
            cfg.check()?;
            Ok(cfg)
        }
    }
}

fn schemes(arg: &Option<String>, default: Scheme) -> Result<Vec<Scheme>> {
    match arg.as_deref() {
        None => Ok(vec![default]),
        Some("all") => Ok(Scheme::ALL.to_vec()),
        Some(list) => list.split(',').map(Scheme::parse).collect(),
    }
}

fn simulate(cfg: ExperimentConfig, schemes: &[Scheme], out: PathBuf) -> Result<()> {
    let coverage = Arc::new(CoverageCache::new(&cfg)?);
    for &scheme in schemes {
        let mut cfg = cfg.clone();
        cfg.scheme = scheme;
        let scenario = Scenario::with_coverage(cfg.clone(), coverage.clone())?;
        let run = run_experiment(&scenario, scheme, RunOptions::default())?;
        let (csv, _) = export_run(&cfg, &run, &out)?;
        let last = run.reports.last();
        let target = cfg.target_accuracy.and_then(|t| run.time_to_accuracy(t));
        println!(
            "{:<12} rounds {:>4}  accuracy {:.4}  sim time {:>12.1} s  time to target {}  -> {}",
            scheme.name(),
            run.reports.len(),
            last.map_or(f64::NAN, |r| r.accuracy),
            last.map_or(0.0, |r| r.sim_time_s),
            target.map_or("never".to_string(), |t| format!("{t:.1} s")),
            csv.display()
        );
    }
    Ok(())
}

fn set_param(cfg: &mut ExperimentConfig, param: &str, v: f64) -> Result<()> {
    match param {
        "alpha" => cfg.partition.alpha = v,
        "sat-cpu" => {
            cfg.nodes.sat_cpu_min_hz = v;
            cfg.nodes.sat_cpu_max_hz = v;
        }
        "air-cpu" => cfg.nodes.air_cpu_hz = v,
        "devices" => cfg.nodes.devices = v as usize,
        other => bail!("unknown sweep parameter `{other}`"),
    }
    cfg.check()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, scheme, seed, out, rounds } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            cfg.check()?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output));
            let list = schemes(&scheme, cfg.scheme)?;
            simulate(cfg, &list, out)
        }
        Command::Optimize { state, config } => {
            let cfg = load(&config)?;
            let text = std::fs::read_to_string(&state).with_context(|| format!("reading {}", state.display()))?;
            let state: RoundState = serde_json::from_str(&text).context("parsing round state")?;
            let solved = optimize_round(&state, cfg.tolerances());
            println!("{}", serde_json::to_string_pretty(&solved)?);
            Ok(())
        }
        Command::Sweep { config, param, values, scheme, out } => {
            let base = load(&config)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&base.output));
            let list = schemes(&scheme, base.scheme)?;
            for v in values {
                let mut cfg = base.clone();
                set_param(&mut cfg, &param, v)?;
                println!("{param} = {v}");
                simulate(cfg, &list, out.join(format!("{param}-{v}")))?;
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let report = run_validation(&cfg.validate)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.pass {
                bail!("bound violated on {} of {} seeds", report.seeds.len() - report.passed, report.seeds.len());
            }
            Ok(())
        }
        Command::Passes { config, start, count } => {
            let cfg = load(&config)?;
            let cache = CoverageCache::new(&cfg)?;
            let mut t = start;
            let mut shown = 0;
            while shown < count {
                let chain = serving_chain(&cache, &cfg, t)?;
                for p in &chain.passes {
                    if shown == count {
                        break;
                    }
                    println!(
                        "sat {:>3}  enter {:>10.1}  exit {:>10.1}  cpu {:.3e} Hz",
                        p.satellite_id, p.t_enter, p.t_exit, p.cpu_rate
                    );
                    shown += 1;
                }
                match chain.gap {
                    Some((from, to)) if shown < count => {
                        println!("gap    {from:>10.1} .. {to:>10.1}");
                        t = to;
                    }
                    _ => break,
                }
            }
            Ok(())
        }
    }
}
