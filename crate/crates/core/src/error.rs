use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("instance too large for {solver}: n = {n}, limit {limit}")]
    TooLarge {
        solver: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("non-finite value in {stage} (layer {layer})")]
    NumericFailure { stage: &'static str, layer: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl fmt::Display) -> Self {
        Error::Parse {
            line,
            msg: msg.to_string(),
        }
    }
}
