use std::path::{Path, PathBuf};

use sritm_core::Error as CoreError;
use thiserror::Error;

/// A computation ran and failed (divergence, a failed check, bad data).
pub const EXIT_FAILURE: u8 = 1;
/// The invocation itself is wrong: flags, config, paths or formats.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Failed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_)
        | CoreError::Sidecar { .. }
        | CoreError::Io { .. }
        | CoreError::Image(_)
        | CoreError::SpecMismatch { .. }
        | CoreError::InvalidArgument { .. }
        | CoreError::UnknownTensor(_)
        | CoreError::MissingTensor(_)
        | CoreError::TensorShape { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Context { source: e, .. } => core_exit_code(e),
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

/// Adds a human-readable prefix to a core error.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for sritm_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Context {
            context: what(),
            source,
        })
    }
}

/// Wraps a std I/O failure with the path it concerns.
pub fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(CoreError::Io {
        path: PathBuf::from(path),
        source,
    })
}
