//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by construction, estimation and scoring routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    /// Shapes of two inputs that must agree do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Jacobi eigensolver did not reach its convergence threshold.
    #[error("eigendecomposition did not converge: relative off-diagonal residual {residual:.3e} after {sweeps} sweeps")]
    EigenNoConvergence { residual: f64, sweeps: usize },

    /// A matrix expected to be positive semidefinite is not.
    #[error("matrix is not positive semidefinite: smallest eigenvalue {0:.3e}")]
    NotPositiveSemidefinite(f64),

    /// Not enough usable data to carry out the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
