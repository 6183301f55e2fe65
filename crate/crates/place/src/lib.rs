//! Monte-Carlo sweeps, result files and the command-line front end for
//! [`bearing_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod sweep;

pub use config::RunConfig;
pub use error::{RunError, EXIT_CONFIG, EXIT_IO};
pub use sweep::{run_sweep, sensor_saving, CellSummary, GridSpec, SweepResult, TrialRow};
