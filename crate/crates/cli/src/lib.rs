//! Library side of the `lpv-guide` binary: run configuration and the three subcommands.

pub mod commands;
pub mod config;
pub mod svg;

pub use config::RunConfig;

use lpv_guidance::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("{0}")]
    Abort(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// 0 success, 2 configuration or input, 3 synthesis, 4 simulation abort, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Synthesis(_) => 3,
            CliError::Abort(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SimulationAbort { .. } => CliError::Abort(e.to_string()),
            CoreError::Synthesis { .. } | CoreError::NotStabilizable(_) | CoreError::Singular(_) => {
                CliError::Synthesis(e.to_string())
            }
            CoreError::Io { .. } => CliError::Other(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
