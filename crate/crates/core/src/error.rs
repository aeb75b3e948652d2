use thiserror::Error;

use crate::solver::IterTrace;

/// Errors produced by the sensing pipeline.
#[derive(Debug, Error)]
pub enum SenseError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error in field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("dense Hessian of order {order} exceeds the guard of {limit}")]
    Size { order: usize, limit: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solver diverged at iteration {iteration}: loss {loss:e} exceeds 10x the initial loss {initial:e}")]
    Divergence {
        iteration: usize,
        loss: f64,
        initial: f64,
        trace: Box<IterTrace>,
    },

    #[error("degenerate ground truth: {0}")]
    DegenerateTruth(String),

    #[error("numeric domain error: {0}")]
    Domain(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SenseError>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, got: impl ToString) -> SenseError {
    SenseError::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
