//! Crate-wide error type.

/// Errors surfaced by estimation, simulation and linear-algebra routines.
#[derive(Debug, thiserror::Error)]
pub enum LgcError {
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },
    #[error("ragged rows: row {row} has {got} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("empty file")]
    EmptyFile,
    #[error("optimizer did not converge: {0}")]
    NotConverged(String),
    #[error("zero gradient: {0}")]
    ZeroGradient(String),
    #[error("non-hermitian residual (anti-hermitian part {0:.3e})")]
    NonHermitianResidual(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LgcError>;
