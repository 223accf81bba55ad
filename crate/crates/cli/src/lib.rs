//! Command-line front end: configuration, the pipeline and its artifacts.

pub mod app;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{resolve, RunConfig};
pub use error::CliError;
