//! Library behind the `chartab` binary: pipeline configuration, the JSONL
//! record schemas the subcommands exchange, command implementations, and the
//! in-memory round-trip harness the fidelity reports are built on.

pub mod commands;
pub mod config;
pub mod harness;
pub mod records;

use thiserror::Error;

/// Command failure split by exit-code class: validation problems (bad config,
/// bad flags, schema violations) exit 2, runtime/I-O problems exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub(crate) fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

pub(crate) fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}
