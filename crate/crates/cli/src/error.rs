//! Command errors and their process exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Parse(_) | Self::Io(_) => 1,
            Self::Certification(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

/// Classify a core error: numerical breakdowns map to exit code 3,
/// everything else is a problem with the inputs.
impl From<thermodelay::Error> for CliError {
    fn from(e: thermodelay::Error) -> Self {
        use thermodelay::Error as E;
        match e {
            E::BlowUp { .. } | E::Singular { .. } | E::NoConvergence | E::TooLarge { .. } => {
                Self::Numerical(e.to_string())
            }
            E::NoFeasibleLambda | E::LambdaInfeasible { .. } | E::ConditionViolated(_) => {
                Self::Certification(e.to_string())
            }
            _ => Self::Usage(e.to_string()),
        }
    }
}
