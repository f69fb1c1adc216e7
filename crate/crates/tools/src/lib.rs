//! File formats and subcommands of the `jko` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod field;
pub mod output;

pub use error::{Result, Status, ToolError};
