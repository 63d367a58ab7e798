use std::fmt;

use mrc_core::Error;

/// Process-level failure, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Verification ran but did not meet its criteria (exit 1).
    VerificationFailed(String),
    /// Bad flags, config or input files (exit 2).
    Invalid(String),
    /// Numerical failure inside the scheme (exit 3).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::VerificationFailed(m) => write!(f, "verification failed: {m}"),
            CliError::Invalid(m) => write!(f, "invalid arguments: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::UnsupportedRegime(_)
            | Error::InvalidGrid(_)
            | Error::Format(_)
            | Error::DimensionMismatch(_)
            | Error::AlreadyExtended(_) => CliError::Invalid(e.to_string()),
            Error::NonFinite | Error::Singular(_) | Error::Design(_) | Error::Trial { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(format!("i/o: {e}"))
    }
}
