use std::path::PathBuf;

/// Errors surfaced by the partitioning library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(
        "total {total} is not a valid partition size for capacity range \
         [{min_capacity}, {max_capacity}]: no decomposition into parts within the range exists; \
         enlarge the sample so the total reaches at least {min_valid}"
    )]
    InvalidTotal {
        total: f64,
        min_capacity: f64,
        max_capacity: f64,
        min_valid: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed data: {0}")]
    MalformedData(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
