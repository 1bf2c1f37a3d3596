//! Command implementations behind the `pulse-memory` binary: configuration,
//! run artifacts, optimisation runs, sweeps and plot-data export.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{analyze, emit_plots, optimize, sweep_energy, sweep_width, AnalysisOptions};
pub use config::{BackendKind, RunConfig};
pub use error::CliError;
