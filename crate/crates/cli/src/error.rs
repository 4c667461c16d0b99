use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] stochdiag_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use stochdiag_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Csv { .. } | CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => match e {
                E::Numerical(_) | E::Fit { .. } => EXIT_NUMERICAL,
                E::UnattainableSkewness(_) | E::UnattainableKurtosis(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            },
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
