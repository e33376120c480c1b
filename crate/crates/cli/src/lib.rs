//! Library side of the `pairswap` command-line tool: CSV ingestion, sweep
//! configuration, run records and the subcommands.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod record;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
