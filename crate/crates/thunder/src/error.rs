use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Api = 1,
    Connectivity = 2,
    Usage = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// A non-success API answer, or a rejected flag.
    #[error("{code}: {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
        body: Vec<u8>,
    },
    #[error("cannot reach the API at {addr}: {reason}")]
    Connect { addr: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Api { .. } => ExitCode::Api,
            CliError::Connect { .. } => ExitCode::Connectivity,
            CliError::Usage(_) | CliError::File { .. } => ExitCode::Usage,
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::File { path, source }
    }
}
