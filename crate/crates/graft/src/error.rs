//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by parsing, retrieval, and evaluation operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed record in an input file, with its 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty feedback set")]
    EmptyFeedbackSet,

    #[error("no generated content for query {0}")]
    MissingGenerated(String),

    #[error("missing generated content for queries: {}", .0.join(", "))]
    MissingGeneratedBatch(Vec<String>),

    #[error("dimension mismatch for {id}: expected {expected}, got {got}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        got: usize,
    },

    #[error("passage {0} has no document mapping")]
    UnmappedPassage(String),

    #[error("query {query_id} present in run {run_tag} only")]
    QueryCoverage { query_id: String, run_tag: String },

    #[error("zero total mass in sparse representation {0}")]
    ZeroMass(String),

    #[error("fewer than two shared queries for paired t-test")]
    NotEnoughQueries,

    #[error("fold {0} has no training topics")]
    EmptyTrainingFold(String),

    #[error("topic {0} is not assigned to any fold")]
    UnassignedTopic(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("analyzer mismatch: {0}")]
    AnalyzerMismatch(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
