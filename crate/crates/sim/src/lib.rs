//! Experiment harness around `sagin-core`: configuration, constellation
//! coverage, node placement, baselines, the round loop and metric export.

pub mod baselines;
pub mod config;
pub mod coverage;
pub mod export;
pub mod harness;
pub mod scenario;
pub mod validate;
