use thiserror::Error;

/// Failures surfaced by the command-line driver, each mapped to a stable
/// exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    /// A theory check or another hard assertion did not hold.
    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("{0}")]
    Run(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Assertion(_) | CliError::Run(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<cfo_core::Error> for CliError {
    fn from(e: cfo_core::Error) -> Self {
        CliError::Run(e.to_string())
    }
}
