use alloc::string::String;

use crate::gqlasso::SolverReport;

/// Errors raised by the quilting routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuiltError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("node index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    /// Assumption A1: every variable must be observed in at least two samples.
    #[error("variable {index} is observed {count} time(s); at least 2 required")]
    UnobservedVariable { index: usize, count: u64 },

    #[error("non-finite value at sample {row}, variable {col}")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The observed covariance admits no positive definite completion.
    #[error("observed covariance is not completable: {0}")]
    NotCompletable(String),

    #[error("solver did not converge after {} iterations (gap {:.3e})", .report.iterations, .report.final_gap)]
    NotConverged { report: SolverReport },

    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, QuiltError>;

pub(crate) fn invalid(msg: impl Into<String>) -> QuiltError {
    QuiltError::InvalidInput(msg.into())
}
