use gelsim_optical::OpticalError;
use std::path::Path;
use thiserror::Error;

/// A failed command, classified by the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input data (exit 2).
    #[error("{0}")]
    Input(String),
    /// The numerics failed: simulation blow-up, NaN losses (exit 3).
    #[error("{0}")]
    Numeric(String),
    /// Reading or writing files failed (exit 4).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message, keeping the classification.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl From<gelsim_core::Error> for CliError {
    fn from(e: gelsim_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<OpticalError> for CliError {
    fn from(e: OpticalError) -> Self {
        match e {
            OpticalError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            OpticalError::Io { .. } => CliError::Io(e.to_string()),
            OpticalError::Core(inner) => inner.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}
