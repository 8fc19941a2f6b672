//! Library side of the `mpflex` command: instance files, reports and the
//! analysis commands.

pub mod commands;
pub mod error;
pub mod instance_file;
pub mod report;

pub use error::{CliError, CliResult};
