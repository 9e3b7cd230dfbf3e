use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("table is empty or has fewer than two columns")]
    EmptyTable,
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid configuration at {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("total least squares solution is not unique (singular value gap {gap:e})")]
    NonUnique { gap: f64 },
    #[error("total least squares solution is degenerate (|V22| = {v22:e})")]
    Degenerate { v22: f64 },
    #[error("input {index} = {value} lies outside the knot span")]
    OutOfRange { index: usize, value: f64 },
    #[error("loss or gradient became non-finite at iteration {iter} (theta = {theta:?})")]
    NonFiniteLoss { iter: usize, theta: Vec<f64> },
    #[error("SIMEX extrapolation system is ill-conditioned")]
    ExtrapolationIllConditioned,
    #[error("{failed} of {total} bootstrap iterations failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("method {method} does not support model {model}")]
    Unsupported { method: String, model: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
