//! Experiment pipelines behind the `sgfl` command.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::{CliError, Result};
