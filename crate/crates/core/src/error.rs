use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in header")]
    Schema(String),

    #[error("row {row}: unknown label `{value}`")]
    Label { row: usize, value: String },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("split failed: {0}")]
    Split(String),

    #[error("lexicon line {line}: {message}")]
    LexiconFormat { line: usize, message: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("join failed: no entry for id `{0}`")]
    Join(String),

    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("fold assignment failed: {0}")]
    Fold(String),

    #[error("base learner {index}: {source}")]
    Base {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing upstream artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, printed by the CLI before the detail.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "E_SCHEMA",
            Error::Label { .. } => "E_LABEL",
            Error::Parse { .. } => "E_PARSE",
            Error::Contract(_) => "E_CONTRACT",
            Error::Split(_) => "E_SPLIT",
            Error::LexiconFormat { .. } => "E_LEXICON",
            Error::Fit(_) => "E_FIT",
            Error::Format { .. } => "E_FORMAT",
            Error::Join(_) => "E_JOIN",
            Error::Divergence { .. } => "E_DIVERGENCE",
            Error::DimMismatch { .. } => "E_DIM",
            Error::Fold(_) => "E_FOLD",
            Error::Base { source, .. } => source.code(),
            Error::Config(_) => "E_CONFIG",
            Error::MissingArtifact(_) => "E_MISSING_ARTIFACT",
            Error::Io { .. } => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
