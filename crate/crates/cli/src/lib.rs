//! Command-line front end: parses a [`RunConfig`], dispatches to the engine
//! and serializes the outcome as JSON or CSV.

pub mod config;
pub mod run;

pub use config::{parse_and_validate, Command, Format, RunConfig};
pub use run::{run, Outcome, CSV_SCHEMA, SCHEMA_VERSION};

/// Exit status for a completed run.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage and engine errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit status when the computation finished but could not decide.
pub const EXIT_UNDETERMINED: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{command}: {source}")]
    Engine {
        command: &'static str,
        #[source]
        source: hardcore_tree::Error,
    },
    #[error("output: {0}")]
    Output(String),
}
