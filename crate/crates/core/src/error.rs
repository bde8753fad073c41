use std::path::PathBuf;

use thiserror::Error;

use crate::score_store::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("cell {cell}: no score for item `{item}` and artifact `{artifact}`")]
    MissingCellEntry {
        cell: String,
        item: String,
        artifact: String,
    },

    #[error("cell {cell}: duplicate {role} score for item `{item}` and artifact `{artifact}`")]
    DuplicateEntry {
        cell: String,
        item: String,
        artifact: String,
        role: &'static str,
    },

    #[error("cell {cell}: score {value} for item `{item}`, artifact `{artifact}` is outside [0, 1]")]
    OutOfRangeScore {
        cell: String,
        item: String,
        artifact: String,
        value: f64,
    },

    #[error("cell {cell} does not share the item set of the other cells")]
    InconsistentItems { cell: String },

    #[error("invalid score tensor: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTensor(Vec<Violation>),

    #[error("degenerate split: {n_score} scoring and {n_eval} held-out items out of {n_items}")]
    DegenerateSplit {
        n_items: usize,
        n_score: usize,
        n_eval: usize,
    },

    #[error("non-finite selection score")]
    NonFiniteScore,

    #[error("item index {index} out of range for {n_items} items")]
    IndexOutOfRange { index: usize, n_items: usize },

    #[error("unknown cell {0}")]
    UnknownCell(String),

    #[error("no influence contributions for cell {0}")]
    MissingInfluence(String),

    #[error("cell sets do not match: {0}")]
    MismatchedCells(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
