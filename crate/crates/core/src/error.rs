use std::path::PathBuf;

/// Errors produced by the valuation engine and its file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("non-finite feature value in row {row} (id `{id}`), column {column}")]
    NonFiniteFeature { row: usize, id: String, column: usize },

    #[error("non-binary label {label} in row {row} (id `{id}`)")]
    NonBinaryLabel { row: usize, id: String, label: i64 },

    #[error("cannot train on an empty training set")]
    EmptyTrainingSet,

    #[error("cannot score on an empty evaluation set")]
    EmptyEvaluationSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("exact Shapley enumeration is limited to {max} points, got {n}")]
    TooLargeForExact { n: usize, max: usize },

    #[error("ranking does not cover the training ids: {0}")]
    RankingMismatch(String),

    #[error("no mislabel flag for id `{0}`")]
    MissingFlag(String),

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("insufficient {class} examples for the {split} split: requested {requested}, {available} remain")]
    InsufficientClass {
        split: String,
        class: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the filesystem rather than of the inputs' content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
