use std::fmt;
use std::path::PathBuf;

use qgs_core::QgsError;

/// Failure of a CLI command, carrying its process exit status.
#[derive(Debug)]
pub enum CliError {
    /// The configuration (file, flags, or their combination) is invalid.
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
    /// A numerical routine refused to produce an uncertified result.
    Numerical(QgsError),
    /// The analytic and sampled distributions disagree.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Validation(msg) => write!(f, "validation failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            CliError::Numerical(e) => Some(e),
            _ => None,
        }
    }
}

impl From<QgsError> for CliError {
    fn from(e: QgsError) -> Self {
        CliError::Numerical(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
