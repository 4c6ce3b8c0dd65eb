use thiserror::Error;

/// Errors raised by the curation library.
#[derive(Debug, Error)]
pub enum CurateError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("point outside the action space: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("kernel has zero amplitude; correlations are undefined")]
    DegenerateKernel,

    #[error("degenerate comparison: variance of the difference is {variance:e}")]
    DegenerateComparison { variance: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("training failed at iteration {iteration}: {message}")]
    Training { iteration: usize, message: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CurateError> = std::result::Result<T, E>;
