use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("line {line}: {source_words} source words but {target_words} target words")]
    AlignmentMismatch {
        line: usize,
        source_words: usize,
        target_words: usize,
    },

    #[error("invalid word {word:?}: {reason}")]
    InvalidWord { word: String, reason: &'static str },

    #[error("invalid cleaning map: {0}")]
    InvalidCleaningMap(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("unknown dialect {0:?}")]
    UnknownDialect(String),

    #[error("malformed sequence: {0}")]
    MalformedSequence(String),

    #[error("rule line {line}: {message}")]
    RuleSyntax { line: usize, message: String },

    #[error("synthetic corpus: {0}")]
    Synthesis(String),

    #[error("symbol id {id} outside vocabulary of size {size}")]
    OutOfVocabulary { id: u32, size: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite {what} at step {step}")]
    Divergence { what: &'static str, step: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short code used as the machine-readable prefix of CLI errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedRecord { .. } => "malformed-record",
            Error::AlignmentMismatch { .. } => "alignment",
            Error::InvalidWord { .. } => "invalid-word",
            Error::InvalidCleaningMap(_) => "cleaning-map",
            Error::InvalidSplit(_) => "split",
            Error::UnknownDialect(_) => "unknown-dialect",
            Error::MalformedSequence(_) => "sequence",
            Error::RuleSyntax { .. } => "rule-syntax",
            Error::Synthesis(_) => "synth",
            Error::OutOfVocabulary { .. } => "oov",
            Error::ShapeMismatch(_) => "shape",
            Error::Divergence { .. } => "divergence",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::InvalidArgument(_) => "argument",
        }
    }
}
