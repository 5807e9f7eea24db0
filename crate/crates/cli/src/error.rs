use std::path::PathBuf;

use thiserror::Error;

/// Exit codes, also listed in the `--help` text.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const FORMAT: i32 = 4;
    pub const PARAMETER: i32 = 5;
    pub const DIVERGENCE: i32 = 6;
    pub const PROX_CHECK: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] cps_core::Error),

    #[error("prox check failed: max deviation {0:.3e} is not below {1:.0e}")]
    ProxCheck(f64, f64),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Format { .. } => exit::FORMAT,
            CliError::Core(cps_core::Error::Divergence { .. }) => exit::DIVERGENCE,
            CliError::Core(_) => exit::PARAMETER,
            CliError::ProxCheck(..) => exit::PROX_CHECK,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
