//! CLI error classification driving exit codes.

use nlps_core::CoreError;

/// Exit code 2 for configuration/input problems, 1 for runtime failures.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

/// Classify a core error raised while loading or validating inputs.
pub fn input_error(e: CoreError) -> CliError {
    CliError::Config(e.to_string())
}

/// Classify a core error raised mid-computation or while writing outputs.
pub fn runtime_error(e: CoreError) -> CliError {
    CliError::Runtime(e.to_string())
}
