use std::path::PathBuf;

/// Errors produced anywhere in the training engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty corpus: {0}")]
    EmptyCorpus(PathBuf),

    #[error("gold labels unavailable: {0}")]
    MissingLabels(String),

    #[error("unsupported task: {0}")]
    Unsupported(String),

    #[error("insufficient overlap between labelers {first} and {second}: {count} jointly non-abstaining rows (need {required})")]
    InsufficientOverlap {
        first: String,
        second: String,
        count: usize,
        required: usize,
    },

    #[error("all triplets were degenerate for labeler {0}")]
    DegenerateTriplets(String),

    #[error("stale forward cache: model changed since the forward pass")]
    StaleCache,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
