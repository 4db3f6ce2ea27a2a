use thiserror::Error;

/// Failures mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or refused overwrites.
    #[error("{0}")]
    Config(String),
    /// Unreadable or inconsistent data, failed training, missing artifacts.
    #[error("{0}")]
    Runtime(String),
    /// An emitted result broke a guaranteed property.
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}
