use std::path::PathBuf;

/// Errors produced by the scheduling library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution was queried before any samples were recorded.
    #[error("cold start: histogram holds no samples")]
    ColdStart,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested computation is intentionally unsupported at this size.
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// An exponential term left the f64 range; the caller must reset the
    /// relative-time base and recompute.
    #[error("floating-point overflow ({0}); base-time reset required")]
    Overflow(String),

    #[error("key {0} not found")]
    NotFound(u64),

    #[error("queue is empty")]
    Empty,

    #[error("queue underflow: requested {requested}, holding {available}")]
    Underflow { requested: usize, available: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
