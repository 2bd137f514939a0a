use thiserror::Error;

/// Errors for state construction and the measure computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty set of kept parties")]
    EmptyKeptSet,

    #[error("dimension budget exceeded: total dimension {0} > {1}")]
    DimensionBudget(usize, usize),

    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
