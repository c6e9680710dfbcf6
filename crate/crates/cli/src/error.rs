use std::path::PathBuf;

use thiserror::Error;

/// Failures of a command, each mapped to a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] optoepr_core::Error),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("validation failure: {0}")]
    Validation(String),
}

impl CliError {
    /// 1 config, 2 numerical, 3 I/O, 4 validation.
    pub fn exit_code(&self) -> u8 {
        use optoepr_core::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_input_error() => 1,
            // A step or window chosen in the sim block is a configuration mistake.
            CliError::Core(E::StepSize(_) | E::Window { .. }) => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Validation(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
