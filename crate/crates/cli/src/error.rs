//! Harness error type with the process exit-code convention:
//! 0 success, 1 validation failure, 2 runtime failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or violated assumptions (exit code 1).
    Validation(String),
    /// Failure while executing a valid experiment (exit code 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(msg) => write!(f, "validation failure: {msg}"),
            Self::Runtime(msg) => write!(f, "runtime failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<nashnet::Error> for CliError {
    fn from(e: nashnet::Error) -> Self {
        use nashnet::Error as E;
        match e {
            E::AgentIndex { .. }
            | E::Dimension { .. }
            | E::InvalidInput(_)
            | E::InvalidConfig(_)
            | E::NotStronglyConnected
            | E::DegenerateGame { .. }
            | E::MissingJacobian => Self::Validation(e.to_string()),
            E::Gradient { .. }
            | E::Domain(_)
            | E::Divergence { .. }
            | E::OracleUnavailable(_)
            | E::Generation { .. } => Self::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(format!("i/o error: {e}"))
    }
}
