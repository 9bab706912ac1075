use thiserror::Error;

/// Failures that stop an experiment before a report exists (exit code 2).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] tiltlab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
