//! Command-line front end for `bmslab-core`: configuration documents,
//! parallel drivers, table rendering and the reference-table harness.

pub mod commands;
pub mod compute;
pub mod config;
pub mod error;
pub mod format;
pub mod golden;
pub mod reproduce;

pub use error::{CliError, Result};
