use thiserror::Error;

/// Errors raised by the search space, the optimizers and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension `{name}`: {reason}")]
    InvalidDimension { name: String, reason: String },

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("loss must not be NaN")]
    NanLoss,

    #[error("no observations recorded yet")]
    Empty,

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("objective failed: {0}")]
    Objective(String),

    #[error("search stalled: {0}")]
    Stalled(String),
}

pub type Result<T> = std::result::Result<T, Error>;
