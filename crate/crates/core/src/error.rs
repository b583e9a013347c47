use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stepsize {eta} exceeds the stability limit {limit}")]
    UnstableStepsize { eta: f64, limit: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("oracle data unavailable: {0}")]
    MissingOracleData(&'static str),
    #[error("memory budget exceeded: {requested} entries requested, limit {limit}")]
    MemoryBudget { requested: usize, limit: usize },
    #[error("eigendecomposition did not converge")]
    Decomposition,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Runtime guards (stability, memory) as opposed to validation failures.
    pub fn is_guard(&self) -> bool {
        matches!(self, Error::UnstableStepsize { .. } | Error::MemoryBudget { .. })
    }
}
