use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rule set: {0}")]
    InvalidRules(String),

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("illegal action slot={slot} row={row} col={col}: {reason}")]
    IllegalAction {
        slot: usize,
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("engine contract violation: {0}")]
    Contract(String),

    #[error("invalid search config: {0}")]
    InvalidSearch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss (policy={policy}, value={value}) at step {step}")]
    NonFiniteLoss { policy: f64, value: f64, step: usize },

    #[error("invalid training config: {0}")]
    InvalidTraining(String),

    #[error("oracle memo budget exhausted after {entries} entries")]
    MemoBudget { entries: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("episode log line {line}: {reason}")]
    EpisodeLog { line: usize, reason: String },

    #[error("malformed csv {path}: row {row}, column {column}: {reason}")]
    Csv {
        path: String,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
