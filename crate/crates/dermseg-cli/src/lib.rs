//! Batch front-end: dataset indexing, configuration, and the train /
//! segment / evaluate / pipeline commands.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod manifest;
pub mod overlay;

use std::path::PathBuf;

/// CLI-level errors, mapped onto process exit codes by `main`.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or config override (exit code 1).
    #[error("usage error: {0}")]
    Usage(String),

    /// Unreadable or inconsistent data (exit code 2).
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] dermseg::Error),

    #[error("i/o error for {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
