//! Implementation of the `entangler` binary: scenario files, the subcommand
//! bodies and CSV rendering. Split out as a library so tests can parse and
//! resolve shipped configs without spawning a process per file.

use thiserror::Error;

use entangler_core::CoreError;

pub mod commands;
pub mod config;
pub mod output;

#[derive(Debug, Error)]
pub enum CliError {
    /// Anything wrong with the declared scenario; exit code 2.
    #[error("{0}")]
    Config(String),
    /// A numerical guard tripped while running it; exit code 3.
    #[error("{0}")]
    Guard(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NormDrift { .. }
            | CoreError::TraceDrift { .. }
            | CoreError::HermiticityDrift { .. }
            | CoreError::CutoffTooSmall { .. }
            | CoreError::MeasurementNeverSucceeds { .. } => Self::Guard(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}
