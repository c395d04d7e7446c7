use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty or degenerate sampling window")]
    EmptyWindow,

    #[error("duplicate point position at index {0}")]
    DuplicatePosition(usize),

    #[error("node class {0} of the stripe network is empty")]
    EmptyBoundary(&'static str),

    #[error("window does not cover the truncated stripe: {0}")]
    WindowTooSmall(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("interior component of {0} nodes is disconnected from both boundaries and not flagged")]
    SingularComponent(usize),

    #[error("cross-section abscissa {0} outside [-l/2, l/2)")]
    CrossSectionOutOfRange(f64),

    #[error("conductivity formulas disagree: {0}")]
    EquivalenceViolation(String),

    #[error("periodic environment is disconnected under retained edges")]
    DisconnectedEnvironment,

    #[error("node {0} has zero exit rate")]
    ZeroExitRate(usize),

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("output directory {0} holds results of a different configuration")]
    ConfigMismatch(PathBuf),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
