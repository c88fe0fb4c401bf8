use thiserror::Error;

/// Errors produced by the design, evaluation and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular matrix (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("sensor {index} coincides with the target")]
    DegenerateGeometry { index: usize },

    #[error("singular Fisher information: design is not identifiable (smallest eigenvalue {min_eigenvalue:e})")]
    SingularFim { min_eigenvalue: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
