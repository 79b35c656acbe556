use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("{levels} levels is too deep for length {len}")]
    TooDeep { levels: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown filter bank `{0}`")]
    UnknownBank(String),

    #[error("invalid threshold spec: {0}")]
    Threshold(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("bad binary format: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}
