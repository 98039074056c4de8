//! Command-line front end: argument parsing, artifact writing and the
//! on-disk evaluation cache.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod record;
pub mod store;
pub mod table;

pub use error::{CliError, CliResult};
