use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Core(entropic_core::Error),
    #[error("solver did not converge: {0}")]
    NotConverged(entropic_core::Error),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl From<entropic_core::Error> for CliError {
    fn from(e: entropic_core::Error) -> Self {
        match e {
            entropic_core::Error::NotConverged { .. } => CliError::NotConverged(e),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::VerificationFailed(_) => EXIT_VERIFY_FAILED,
            _ => EXIT_USAGE,
        }
    }
}
