use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Everything except [`Error::Solver`] is a validation error: the inputs
/// violate a precondition and no computation was attempted.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix or weight entry is NaN or infinite.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// Shapes of two arguments do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A weight vector is not a probability measure.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// An operation requires per-row labels that are missing.
    #[error("labels required: {0}")]
    MissingLabels(String),

    /// Any other precondition violation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A solver failed to produce a usable result (numerical breakdown,
    /// iteration limit with an infeasible iterate, ...).
    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    /// True for solver failures, false for validation errors.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
