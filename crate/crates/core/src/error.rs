//! Error taxonomy shared across the crate.
//!
//! Variants map onto the CLI exit codes: configuration/parameter errors are
//! user-fixable (exit 1), data/state/training errors are runtime failures
//! (exit 2), and I/O errors are environment failures (exit 3).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or unparseable config file.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid argument to an operation (out-of-range parameter, bad bound).
    #[error("parameter error: {0}")]
    Param(String),

    /// Bad input data (non-finite draw, degenerate market, malformed file).
    #[error("data error: {0}")]
    Data(String),

    /// Operation called in an invalid state (e.g. `step` after `done`).
    #[error("state error: {0}")]
    State(String),

    /// Training failure (divergence, non-finite loss, dimension mismatch).
    #[error("training error: {0}")]
    Train(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 runtime, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Param(_) => 1,
            Error::Data(_) | Error::State(_) | Error::Train(_) => 2,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
