use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] reginit::Error),
}

impl BenchError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { field: field.into(), message: message.into() }
    }

    /// Process exit code: 2 for configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) | Self::Csv(_) => 3,
            Self::Core(reginit::Error::Io(_) | reginit::Error::Parse { .. }) => 3,
            Self::Config { .. } | Self::Core(_) => 2,
        }
    }
}

pub type BenchResult<T> = Result<T, BenchError>;
