use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("outside the domain of definition: {0}")]
    OutOfDomain(String),

    #[error("level set is empty: {0}")]
    EmptyLevelSet(String),

    #[error("level set touches the grid boundary: {0}")]
    Truncated(String),

    #[error("lost convexity: {0}")]
    ConvexityLoss(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bracketing failure: {message}")]
    Bracketing { message: String, trace: Vec<String> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
