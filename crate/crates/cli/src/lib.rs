//! IO companion to `decouple-core`: CSV/JSON file formats, the replicated
//! experiment harness, and the `decouple` command-line tool.

pub mod dataio;
pub mod experiment;
pub mod fitio;
pub mod manifest;
pub mod schemas;

use std::process::ExitCode;

/// Tool-level error; the variant decides the process exit code
/// (2 validation, 3 numerical, 4 I/O).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
            CliError::Io(_) => ExitCode::from(4),
        }
    }
}

impl From<decouple_core::Error> for CliError {
    fn from(e: decouple_core::Error) -> Self {
        use decouple_core::Error as E;
        match e {
            E::Parameter(_) | E::Dimension(_) | E::Budget(_) | E::WeightDomain(_)
            | E::MetricUnavailable(_) => CliError::Validation(e.to_string()),
            E::Convergence(_) | E::NonFinite { .. } | E::SingularModel(_)
            | E::DegenerateColumn(_) | E::CorruptDraws(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Validation-flavored error constructor.
pub fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}
pub mod commands;
