use std::io;

use thiserror::Error;

use crate::calendar::CalendarError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown day `{0}`")]
    UnknownDay(String),
    #[error("unknown time phrase `{0}`")]
    UnknownPhrase(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
