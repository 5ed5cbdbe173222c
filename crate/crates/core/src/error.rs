use thiserror::Error;

use crate::wl1solver::LinearModel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("zero target at row {row}: MAPE is infinite for every model")]
    ZeroTarget { row: usize },

    #[error("degenerate design: rank {rank} < {required} required columns")]
    DegenerateDesign { rank: usize, required: usize },

    #[error("solver did not converge after {iterations} iterations (best objective {objective})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        best: Box<LinearModel>,
    },

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
