use std::path::PathBuf;

use thiserror::Error;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Input,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown input format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),

    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("invalid period windows: {0}")]
    InvalidPeriods(String),

    #[error("empty period {0}")]
    EmptyPeriod(&'static str),

    #[error("empty vocabulary (no term reaches min_df = {min_df})")]
    EmptyVocabulary { min_df: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("term `{0}` is not in the vocabulary")]
    UnknownTerm(String),

    #[error("dispersion vector has no positive share")]
    ZeroShares,

    #[error("k = {k} exceeds the number of documents ({n_rows})")]
    TooManyClusters { k: usize, n_rows: usize },

    #[error("PCA needs at least two points, got {0}")]
    TooFewPoints(usize),

    #[error("vocabulary mismatch between cluster models")]
    VocabularyMismatch,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidPeriods(_) | Error::InvalidConfig(_) | Error::UnknownFormat(_) => {
                ErrorKind::Config
            }
            Error::Malformed { .. }
            | Error::DuplicateId(_)
            | Error::EmptyPeriod(_)
            | Error::EmptyVocabulary { .. }
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Input,
            Error::UnknownTerm(_)
            | Error::ZeroShares
            | Error::TooManyClusters { .. }
            | Error::TooFewPoints(_)
            | Error::VocabularyMismatch => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
