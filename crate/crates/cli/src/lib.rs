//! Library backing the `qpc` command line tool: Monte Carlo harness, CSV
//! panel ingestion and report rendering.

pub mod config;
pub mod data;
pub mod mc;
pub mod report;

pub use config::{EstimatorKind, McConfig};
pub use mc::{run_cell, run_monte_carlo, CellReport, McReport};
