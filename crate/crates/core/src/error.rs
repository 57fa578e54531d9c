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

    #[error("missing field '{field}' at line {line}")]
    MissingField { field: &'static str, line: usize },

    #[error("malformed record at line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("node id {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("cannot draw {requested} negatives: only {available} candidate pairs remain")]
    InfeasibleSample { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("metric needs at least one positive and one negative example")]
    SingleClass,

    #[error("matrix year {year} is after reference year {ref_year}")]
    FutureYear { year: i32, ref_year: i32 },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("fixture missing for cache key {key}")]
    FixtureMissing { key: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("bad file format: {0}")]
    Format(String),

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
