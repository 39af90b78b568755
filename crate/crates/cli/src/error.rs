use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Parse or validation failure in a scenario file; parse messages carry line and column.
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("scenario '{scenario}': {source}")]
    Library {
        scenario: String,
        #[source]
        source: nonmarkov::Error,
    },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn library(scenario: &str, source: nonmarkov::Error) -> Self {
        CliError::Library { scenario: scenario.to_owned(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
