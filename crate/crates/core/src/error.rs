use std::path::PathBuf;

/// Errors produced by the toolkit.
///
/// Variants split into two families: configuration/validation problems
/// (bad input values, broken invariants) and I/O failures. The CLI maps the
/// former to exit code 2 and the latter to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate video id `{0}`")]
    DuplicateId(String),

    #[error("invalid video id `{0}`: ids must be non-empty and use only [A-Za-z0-9_.-]")]
    InvalidId(String),

    #[error("video `{id}`: {frames} frames but {labels} labels")]
    LengthMismatch {
        id: String,
        frames: usize,
        labels: usize,
    },

    #[error("video `{0}` has no frames")]
    EmptyVideo(String),

    #[error("label out of range: {0}")]
    LabelOutOfRange(String),

    #[error("undefined correlation: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("prediction keys do not match the partition: {} missing, {} unexpected", missing.len(), extra.len())]
    PredictionKeys {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the underlying filesystem rather than of the
    /// data or configuration.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
