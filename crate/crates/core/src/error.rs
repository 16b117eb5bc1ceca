use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no word reaches the minimum count of {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("words not in vocabulary: {}", .0.join(", "))]
    UnknownWords(Vec<String>),

    #[error("unknown document ids: {}", .0.join(", "))]
    UnknownDocuments(Vec<String>),

    #[error("topic file {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("unsupported archive format: {0}")]
    UnsupportedFormat(String),

    #[error("archive version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
