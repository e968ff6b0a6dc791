use thiserror::Error;

/// Errors raised by the model, solvers and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An instance or experiment parameter violates its contract.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver ran out of budget before reaching tolerance.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The requested computation is outside the tractable class.
    #[error("unsupported instance: {0}")]
    Unsupported(String),

    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
