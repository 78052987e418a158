//! Command line front end for `epde-core`: built-in problems, convergence
//! studies, stability scans and CSV output.

pub mod app;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use app::{run, Cli, Command};
pub use error::{CliError, Result};
