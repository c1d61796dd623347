use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line tool.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed state file: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{kind}: {source}")]
    Module {
        kind: String,
        #[source]
        source: qmarginal::Error,
    },
}

impl From<qmarginal::Error> for CliError {
    fn from(source: qmarginal::Error) -> Self {
        Self::Module {
            kind: error_kind(&source),
            source,
        }
    }
}

impl CliError {
    /// Usage, I/O and validation failures exit 1; errors raised by the
    /// numeric routines exit 2.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Module { .. } => 2,
            _ => 1,
        }
    }

    pub fn invalid(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Variant name of a module error, e.g. `NegativeSymbol`.
pub fn error_kind(e: &qmarginal::Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !c.is_ascii_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}

pub type CliResult<T> = std::result::Result<T, CliError>;
