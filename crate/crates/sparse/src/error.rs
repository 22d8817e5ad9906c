use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero pivot in column {column} survived pivoting")]
    SingularPivot { column: usize },
    #[error("matrix has complex eigenvalues")]
    ComplexEigenvalues,
    #[error("eigenvalues are not separated (gap {gap:e})")]
    RepeatedEigenvalues { gap: f64 },
    #[error("GMRES did not converge after {iterations} iterations (residual {residual:e})")]
    GmresNoConvergence { iterations: usize, residual: f64 },
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;
