//! Command errors and their process exit codes.

use std::fmt;

/// A failed command. Usage and data problems exit with 2, anything else
/// with 1.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Data(_) => 2,
            Self::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pairswap::Error> for CliError {
    fn from(e: pairswap::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
