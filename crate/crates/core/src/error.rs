use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the factorization kernels, solvers and I/O layer.
#[derive(Debug, Error)]
pub enum GlsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: {what} (residual {residual:e})")]
    FactorizationFailure { what: &'static str, residual: f64 },

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    IndefiniteMatrix { index: usize, pivot: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NegativeEigenvalue { eigenvalue: f64 },

    #[error("numerical breakdown at step {step}: {what}")]
    NumericalBreakdown { step: usize, what: String },

    #[error("method unsupported: {0}")]
    MethodUnsupported(String),

    #[error("planted solution failed validation: normal residual {normal:e}, orthogonality residual {orthogonality:e}")]
    ValidationFailure { normal: f64, orthogonality: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = GlsError> = std::result::Result<T, E>;
