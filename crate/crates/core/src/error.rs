use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("record {record}: {message}")]
    MalformedRecord { record: usize, message: String },

    #[error("document {document}: gold has {gold} labels but {tokens} tokens")]
    GoldAlignment {
        document: String,
        gold: usize,
        tokens: usize,
    },

    #[error("duplicate document id {0}")]
    DuplicateDocument(String),

    #[error("document {0} has no gold labels")]
    MissingGold(String),

    #[error("unknown document {0}")]
    UnknownDocument(String),

    #[error("cannot split {documents} documents into {folds} folds")]
    FoldCount { folds: usize, documents: usize },

    #[error("embedding entry {word}: expected dimension {expected}, found {found}")]
    EmbeddingDimension {
        word: String,
        expected: usize,
        found: usize,
    },

    #[error("contextual features missing for document {document}, token {token_index}")]
    MissingFeatures {
        document: String,
        token_index: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("score count mismatch for document {document}: expected {expected}, found {found}")]
    ScoreAlignment {
        document: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training data: {0}")]
    TrainingData(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("smoothing requested without a transition model")]
    MissingTransitions,

    #[error("empty line cannot be smoothed")]
    EmptyLine,

    #[error("density is undefined for empty document {0}")]
    EmptyDocument(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
