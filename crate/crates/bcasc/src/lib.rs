//! File formats and experiment drivers on top of `bcasc-core`: JSON code
//! files, CSV tables, run manifests, parameter sweeps and phase diagrams.
//! The `bcasc` binary wraps these in a command-line interface.

use std::path::{Path, PathBuf};

pub mod codefile;
pub mod experiments;
pub mod manifest;
pub mod table;

pub use bcasc_core as core;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BCASC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "bcasc-out";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] bcasc_core::Error),
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: &Path, error: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), error }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
