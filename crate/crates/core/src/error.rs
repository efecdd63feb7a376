use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document `{0}` is already indexed")]
    DuplicateDoc(String),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no embedding for content digest {0}")]
    MissingEmbedding(String),

    #[error("embedding session `{session}`: {source}")]
    Embedding {
        session: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid vocabulary entry `{entry}`: {msg}")]
    Vocabulary { entry: String, msg: String },

    #[error("instance `{instance}`, field `{field}`: {msg}")]
    Schema {
        instance: String,
        field: String,
        msg: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("corrupt store file {path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },

    #[error("unsupported format version {found} in {path} (this build reads {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
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

    pub(crate) fn corrupt(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit status for the CLI: 1 for evaluation failures, 2 for
    /// I/O, configuration and input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Evaluation(_) => 1,
            _ => 2,
        }
    }
}
