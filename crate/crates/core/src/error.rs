use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Schema {
        file: String,
        line: usize,
        message: String,
    },

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("width mismatch in {what}: expected {expected}, got {actual}")]
    WidthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("insufficient history for user `{user}`: {statuses} status(es), need at least 2")]
    InsufficientHistory { user: String, statuses: usize },

    #[error("objective diverged for user `{user}` at transition {transition}")]
    Diverged { user: String, transition: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("split leaves the {0} side empty")]
    EmptySplit(&'static str),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("user `{0}` has not been trained")]
    Untrained(String),

    #[error("user `{0}` has no label")]
    Unlabeled(String),

    #[error("{0}")]
    TestSize(String),

    #[error("no positive labels in corpus")]
    NoPositives,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for malformed-input errors (bad JSONL lines, bad config files).
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Schema { .. } | Error::Json(_) | Error::Csv(_))
    }
}
