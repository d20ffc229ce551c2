use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no observation has positive kernel weight at x0 = {x0}")]
    EmptyWindow { x0: f64 },

    #[error("covariate density estimate is zero at x0 = {x0}; confidence interval unavailable")]
    DegenerateDensity { x0: f64 },

    #[error("sample is degenerate: {0}")]
    DegenerateSample(String),

    #[error("Sheather-Jones fixed-point equation has no bracketed root")]
    NoRoot,

    #[error("need at least 10 concomitants, got k = {k}")]
    TooFewConcomitants { k: usize },

    #[error("covariance matrix is not positive definite at row {row}")]
    CholeskyFailure { row: usize },

    #[error("every replication was missing at k = {k}")]
    AllMissing { k: usize },

    #[error("{side} side has {count} observation(s); need at least 2")]
    EmptySide { side: &'static str, count: usize },

    #[error("non-positive response {value} at position {index}")]
    NonPositiveResponse { index: usize, value: f64 },

    #[error("series has zero sample variance")]
    DegenerateSeries,

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: u64,
        column: String,
        reason: String,
    },

    #[error("invariant violated at line {line}: {reason}")]
    InvariantViolation { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
