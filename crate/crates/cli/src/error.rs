use std::path::PathBuf;

use thiserror::Error;

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const MISSING_FILE: i32 = 3;
    pub const SYNTAX: i32 = 4;
    pub const INVALID_CONFIG: i32 = 5;
    pub const RUNTIME: i32 = 6;
    pub const IO: i32 = 7;
    pub const VERIFY_FAILED: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: malformed JSON at line {line}, column {column}: {message}", path.display())]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    /// `field` is a dotted path such as `cz_errors.lam`.
    #[error("invalid config at `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("{0}")]
    Runtime(#[from] qmelab_core::Error),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    VerifyFailed(String),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingFile(_) => exit::MISSING_FILE,
            CliError::Syntax { .. } => exit::SYNTAX,
            CliError::Invalid { .. } => exit::INVALID_CONFIG,
            CliError::Runtime(_) => exit::RUNTIME,
            CliError::Io { .. } => exit::IO,
            CliError::VerifyFailed(_) => exit::VERIFY_FAILED,
            CliError::Usage(_) => exit::USAGE,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
