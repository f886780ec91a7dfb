//! Command-line driver: synthetic benchmarks, theory checks and tuning of
//! external programs over a JSON-lines protocol.

pub mod commands;
pub mod config;
pub mod error;
pub mod logio;
pub mod theory;
pub mod wire;

pub use config::ExperimentConfig;
pub use error::CliError;
