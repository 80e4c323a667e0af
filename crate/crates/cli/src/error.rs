use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("cannot load lexicons: {0}")]
    Lexicons(#[from] quantsent::lexicon::LexiconError),
    #[error("{0}")]
    Kb(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const KB: u8 = 3;
    pub const IO: u8 = 4;

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Lexicons(_) => Self::CONFIG,
            CliError::Kb(_) => Self::KB,
            CliError::Io { .. } | CliError::Data(_) => Self::IO,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
