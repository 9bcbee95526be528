//! Library backing the `corrgcv` binary: config parsing, run manifests, and
//! the four subcommand implementations (`theory`, `simulate`, `estimate`,
//! `validate`).

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_estimate, cmd_simulate, cmd_theory, cmd_validate, ExitCode};
pub use config::{CliConfig, CommonOpts};
