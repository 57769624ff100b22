use std::path::PathBuf;

/// Errors raised anywhere in the classification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class {0} has no labeled pixels")]
    EmptyClass(u16),

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("non-finite iterate at iteration {0}")]
    NonFinite(usize),

    #[error("{0} did not converge")]
    Decomposition(&'static str),

    #[error("step-size search failed at iteration {iteration} after {halvings} reductions")]
    StepFailure { iteration: usize, halvings: usize },

    #[error("feature-sign search cycled: {changes} active-set changes exceed the limit of {limit}")]
    Cycle { changes: usize, limit: usize },

    #[error("{path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("pixel ({row}, {col}): {source}")]
    AtPixel {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} pixels failed (limit 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
