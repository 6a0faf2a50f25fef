//! Experiment harness around `wyner-core`: dataset generation, single solves,
//! resumable parameter sweeps, clustering evaluation and plane CSVs.

pub mod commands;
pub mod error;
pub mod io;
pub mod plane;
pub mod solver;
pub mod sweep;

pub use error::{CliError, Result};
