use thiserror::Error;

/// Errors produced by the tracking toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    /// A covariance that should be positive definite is not; the filter has diverged.
    #[error("filter divergence: {0}")]
    FilterDivergence(String),

    /// The Sinkhorn kernel produced NaN or overflowed (gamma too small for the cost scale).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
