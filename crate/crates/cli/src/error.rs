use thiserror::Error;

/// Failures of the driver, mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<nrm_core::Error> for CliError {
    fn from(e: nrm_core::Error) -> Self {
        match e {
            nrm_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Solver(other.to_string()),
        }
    }
}
