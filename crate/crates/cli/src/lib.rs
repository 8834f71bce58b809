//! Batch driver for the hyper-reduced MAC toolkit: full-order solves,
//! convergence tables, greedy training, online solves and validation.
//!
//! Exit codes: `0` success, `1` numerical or I/O failure, `2` usage,
//! configuration or file-format error.

pub mod cache;
pub mod commands;
pub mod config;

use std::io;
use std::path::{Path, PathBuf};

use hymac::{FormatError, RomError, SolveError, TrainError};
use thiserror::Error;

pub use commands::{cmd_convergence, cmd_fom, cmd_solve, cmd_train, cmd_validate};
pub use config::{ConfigError, RunConfig};
pub use hymac::fom::dump::fmt_f64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Train(TrainError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Format(FormatError::Io(_)) => 1,
            CliError::Format(_) => 2,
            CliError::Train(TrainError::Config(_)) => 2,
            _ => 1,
        }
    }
}
