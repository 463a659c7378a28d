use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({x}, {y}, {w}, {h}): extents must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("score {value} for {what} is outside [0, 1]")]
    ScoreOutOfRange { what: &'static str, value: f64 },

    #[error("frame {got} does not follow frame {last}")]
    OutOfOrderFrame { last: u64, got: u64 },

    #[error("k = {k} is outside 1..={len}")]
    SelectionOutOfRange { k: usize, len: usize },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("no ground truth boxes: metric is undefined")]
    NoGroundTruth,

    #[error("duplicate identity {id} in frame {frame}")]
    DuplicateIdentity { frame: u64, id: u64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
