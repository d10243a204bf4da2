use thiserror::Error;

/// Errors surfaced by plan construction, pipeline steps, and metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("layout mismatch: expected {expected}, matrix is {got}")]
    LayoutMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("metric failure: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
