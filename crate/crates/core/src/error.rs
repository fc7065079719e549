use std::path::PathBuf;

/// Errors produced anywhere in the scoring pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("truth for `{id}`: {message}")]
    Truth { id: String, message: String },

    #[error("missing truth annotation for post `{0}`")]
    MissingTruth(String),

    #[error("{0} lexicon missing")]
    LexiconMissing(String),

    #[error("{0} lexicon is empty")]
    LexiconEmpty(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension mismatch for `{id}`: expected {expected}, found {found}")]
    Dimension {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("missing image vector for post `{0}`")]
    MissingImage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
