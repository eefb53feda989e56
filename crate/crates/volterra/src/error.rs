//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by simulation, reconstruction, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// The roughness index must lie strictly inside (1/2, 1).
    #[error("alpha out of (0.5,1): got {0}")]
    AlphaOutOfRange(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Interval endpoints violate 0 <= s0 <= s1 <= t.
    #[error("invalid integration interval: s0={s0}, s1={s1}, t={t}")]
    IntervalOrder { s0: f64, s1: f64, t: f64 },

    /// A kernel evaluation was requested outside its domain (e.g. u >= t).
    #[error("domain error: {0}")]
    Domain(String),

    /// The simulated state left the admissible range (overflow or NaN).
    #[error("simulation diverged at step {index}")]
    SimulationDiverged { index: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Query or comparison grids do not line up.
    #[error("grid alignment error: {0}")]
    Alignment(String),

    /// The contrast weight matrix is not positive definite.
    #[error("weight matrix error: {0}")]
    Weight(String),

    /// The normal matrix of the linear estimator is numerically singular.
    #[error("rank-deficient normal matrix (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },

    /// The limit information matrix is not invertible.
    #[error("information matrix is singular: {0}")]
    SingularInformation(String),

    /// An operation was called outside its documented contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Too few valid points for a log-log regression.
    #[error("regression error: {0}")]
    Regression(String),

    /// Every replication of a Monte Carlo cell failed.
    #[error("cell (epsilon={epsilon}, k={k}) failed: {detail}")]
    CellFailed { epsilon: f64, k: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
