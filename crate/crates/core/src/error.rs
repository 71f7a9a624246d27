use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: {malformed} of {total} lines malformed, exceeds 1% limit")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("non-finite value in loss term `{term}`")]
    NonFinite { term: &'static str },

    #[error("training aborted after {0} consecutive non-finite iterations")]
    Diverged(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pseudo-dictionary is empty; try disabling mutual nearest-neighbour filtering")]
    EmptyDictionary,

    #[error("no dictionary entry is covered by the vocabularies")]
    EmptyEvaluation,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("oracle scale guard: {rows} rows exceeds limit {limit}")]
    ScaleGuard { rows: usize, limit: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
