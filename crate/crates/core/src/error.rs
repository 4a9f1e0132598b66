use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("link with zero rate cannot carry {bits} bits")]
    InfeasibleLink { bits: f64 },
    #[error("no serving satellite between t={from:.3}s and t={to:.3}s")]
    CoverageGap { from: f64, to: f64 },
    #[error("satellite passes exhausted with {remaining:.3} samples left to process")]
    SpaceInfeasible { remaining: f64 },
    #[error("non-finite gradient at local step {step}; learning rate too large?")]
    NonFiniteGradient { step: usize },
    #[error("aggregation weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}
