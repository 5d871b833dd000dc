use thiserror::Error;

/// Errors produced anywhere in the generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown tile {ch:?} at row {row}, column {col}")]
    UnknownTile { ch: char, row: usize, col: usize },

    #[error("run of length {length} along {axis} is shorter than one 16-tile window")]
    EmptySegmentation { axis: &'static str, length: usize },

    #[error("vocabulary mismatch: expected {expected}, found {found}")]
    Vocabulary { expected: String, found: String },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("activation cache is stale (cache revision {cache}, network revision {net})")]
    Cache { cache: u64, net: u64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the variant, for machine-readable messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::UnknownTile { .. } => "unknown-tile",
            Error::EmptySegmentation { .. } => "empty-segmentation",
            Error::Vocabulary { .. } => "vocabulary",
            Error::InvalidVocabulary(_) => "invalid-vocabulary",
            Error::Shape(_) => "shape",
            Error::Cache { .. } => "cache",
            Error::Numerical(_) => "numerical",
            Error::Range(_) => "range",
            Error::EmptyCorpus(_) => "empty-corpus",
            Error::EmptyInput(_) => "empty-input",
            Error::Archive(_) => "archive",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
