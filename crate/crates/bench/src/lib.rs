//! Experiment runner for the `reginit` initialization strategies.
//!
//! A run configuration ([`ExperimentSpec`]) names a problem and the
//! strategy, memory and alpha axes. [`run_experiment`] executes every cell
//! and [`emit_report`] writes the rows as CSV or an aligned table.

pub mod config;
pub mod error;
pub mod experiment;
pub mod register;
pub mod report;

pub use config::{ExperimentSpec, ImageSource, ProblemSpec};
pub use error::{BenchError, BenchResult};
pub use experiment::{aggregate, run_experiment, ReportRow};
pub use report::{emit_report, ReportFormat};
