//! Command line driver for the market-making simulator: synthetic data,
//! snapshot generation, training, evaluation and report tables.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 input data or
//! checkpoint errors, 4 runtime failures.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::CliError;
