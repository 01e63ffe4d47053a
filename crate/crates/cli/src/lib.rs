//! Library surface of the `otds` CLI: file formats, run configuration, the
//! generator spec, and the command implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod genspec;
pub mod io;
pub mod svg;

pub use error::{CliError, CliResult};
