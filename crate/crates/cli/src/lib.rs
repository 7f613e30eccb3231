//! Scenario-file front end for `ofdm-shaper`: loads a TOML scenario, runs
//! one command and writes plot-ready CSV and JSON artifacts.

pub mod commands;
pub mod error;
pub mod plot;
pub mod scenario;

pub use commands::{run, Command, Outcome, RunOptions};
pub use error::CliError;
pub use scenario::Scenario;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "OFDM_SHAPER_THREADS";
