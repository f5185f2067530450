//! Crate-wide error type.

/// Errors produced by dataset handling, training, and clustering operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter vector or feature row does not match the expected width.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation that needs at least one sample received an empty split.
    #[error("empty data split")]
    EmptySplit,

    /// A configuration value violates its documented range or constraint.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Trimming `beta` from each side of `members` values retains nothing.
    #[error("over-trimming: trim level {beta} retains no values out of {members}")]
    OverTrim { members: usize, beta: f64 },

    /// Every cluster fell below the minimum size threshold.
    #[error("no cluster of size >= {min_size}")]
    NoClusterMeetsMinSize { min_size: usize },

    /// The divergence guard tripped: the loss exceeded the finite threshold.
    #[error("training diverged: loss = {loss}")]
    Diverged { loss: f64 },

    /// Resampling requires a synthetically generated dataset.
    #[error("dataset was not synthetically generated; cannot resample")]
    NotSynthetic,

    /// A data file failed to parse; names the file and 1-based line.
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },

    /// An I/O failure, annotated with the path involved.
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A JSON (de)serialization failure, annotated with the path involved.
    #[error("json error at {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
