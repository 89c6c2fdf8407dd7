use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance is not positive definite after flooring")]
    NotPositiveDefinite,

    #[error("singular measurement geometry at position ({0}, {1}, {2})")]
    SingularGeometry(f64, f64, f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
