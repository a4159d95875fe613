//! Command-line driver: config parsing, run execution and the results store.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod records;
pub mod run;
pub mod store;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{execute, run_config, run_file, RunOutcome};
pub use store::{ExportFormat, ResultsStore, OUTPUT_DIR_ENV};
