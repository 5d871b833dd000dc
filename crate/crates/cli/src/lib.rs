//! Command-line shell around the `levelchain` pipeline: configuration,
//! persistence, and the subcommands of the `levelchain` binary.

pub mod app;
pub mod config;

pub use app::{cli_main, error_line, generate_layout, Cli, Command, Mode};
pub use config::RunConfig;
