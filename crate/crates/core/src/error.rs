use thiserror::Error;

/// Failure modes shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),
    #[error("convergence failure in {what}: {detail}")]
    Convergence { what: &'static str, detail: String },
    #[error("solution diverged: {0}")]
    Divergence(String),
    #[error("non-finite numerical input: {0}")]
    NumericalInput(String),
    #[error("outside validity horizon: {0}")]
    OutOfValidity(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("fit window: {0}")]
    FitWindow(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn convergence(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Convergence {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
