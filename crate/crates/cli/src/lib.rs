//! Library side of the `onet` binary: config files, the pipeline commands
//! and their error classification.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::Run;
pub use config::ExperimentConfig;
pub use error::CliError;
