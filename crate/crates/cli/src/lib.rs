//! The `polprog` command-line pipeline.
//!
//! Subcommands: `validate`, `synth`, `grid`, `explain`, `report`, `all`.
//! Exit codes: 0 success, 1 validation error (bad config, corpus or input
//! file), 2 runtime error, 64 usage error.

pub mod cli;
pub mod commands;
pub mod config;
pub mod rundir;

pub use cli::{run, Cli};
pub use config::{ConfigLayers, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}
