use mb4nls_sparse::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Mb4Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("kinetic matrix is not symmetric")]
    NonSymmetricKinetic,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("simplified Newton did not converge in {iterations} iterations (last |r| = {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("step from t = {t} failed: {source}")]
    StepFailed {
        t: f64,
        #[source]
        source: Box<Mb4Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Mb4Error {
    /// True for Newton failures, including those wrapped with the failing time.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Mb4Error::NonConvergence { .. } => true,
            Mb4Error::StepFailed { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Mb4Error>;
