use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: encalign::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("missing {what} at {path}\n  {hint}")]
    Missing { what: String, path: PathBuf, hint: String },
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core { source, .. } if source.is_input_error() => 2,
            CliError::Core { .. } => 1,
            CliError::Input(_) => 2,
            CliError::Missing { .. } => 3,
            CliError::Output { .. } | CliError::Internal(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub trait Context<T> {
    fn context(self, f: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for encalign::Result<T> {
    fn context(self, f: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Core { context: f(), source })
    }
}
