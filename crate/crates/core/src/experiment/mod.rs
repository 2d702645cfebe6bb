//! Run configuration, serialized reports and the drivers behind the `dnls` subcommands.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::run;
pub use config::{Command, Overrides, RunConfig};
pub use report::RunReport;
