use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unstable system: rho = {rho} must be < 1")]
    UnstableSystem { rho: f64 },
    #[error(
        "invalid delay d = {d}: deterministic service needs d to be a non-negative integer multiple of 1/mu = {unit}"
    )]
    InvalidDelay { d: f64, unit: f64 },
    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("no class-1 traffic (rho1 = 0): class-1 mean is undefined")]
    NoClass1,
    #[error("state space truncation needs {needed} states, cap is {cap}")]
    TruncationOverflow { needed: usize, cap: usize },
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("root bracketing failed: {0}")]
    RootBracketFailure(String),
    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("inversion error estimate {estimate:e} exceeds target {target:e} at t = {t}")]
    AccuracyNotMet { estimate: f64, target: f64, t: f64 },
    #[error("curves do not overlap")]
    EmptyOverlap,
    #[error("mean waiting time must be positive when rho > 0")]
    DegenerateMean,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("constraint is not monotone in b: {0}")]
    NonMonotone(String),
}

pub type Result<T> = std::result::Result<T, Error>;
