use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight {value} outside representable interval [{min}, {max}]")]
    WeightRange { value: i32, min: i32, max: i32 },

    #[error("invalid {width}-bit code {bits:#b}")]
    InvalidCode { bits: u16, width: u8 },

    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("cell (bank {bank}, col {col}) read before any weight was written")]
    Uninitialized { bank: usize, col: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("control state S[1:0]=00 is forbidden")]
    ForbiddenState,

    #[error("operand {value} V outside multiplier operating range ±{limit} V")]
    InputRange { value: f64, limit: f64 },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("{what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Validation(String),

    #[error("dataset row {row}: {msg}")]
    DatasetRow { row: usize, msg: String },

    #[error("dataset schema: {0}")]
    Schema(String),

    #[error("ledger: {0}")]
    Ledger(String),

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
