use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("non-finite {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("ill-conditioned system (min eigenvalue of the Gram matrix {min_eigen:.3e})")]
    IllConditioned { min_eigen: f64 },

    #[error("active-set Gram matrix is rank deficient (min eigenvalue {min_eigen:.3e})")]
    RankDeficient { min_eigen: f64 },

    #[error("active set is empty")]
    EmptyActiveSet,

    #[error("step size underflow at iteration {iteration}")]
    StepUnderflow { iteration: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
