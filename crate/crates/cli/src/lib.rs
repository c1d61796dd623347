//! Command-line front end for `qmarginal`: JSON state files, subcommands
//! and reports.

pub mod batch;
pub mod canon;
pub mod commands;
pub mod error;
pub mod report;
pub mod statefile;

pub use commands::{run_args, Cli, Io};
pub use error::CliError;
