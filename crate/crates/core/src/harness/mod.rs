//! CLI, matrix IO, and experiment drivers.

pub mod cli;
pub mod experiment;
pub mod io;

pub use experiment::{run_experiment, ExperimentConfig, ExperimentKind, ResultRow};
pub use io::{load_matrix, save_matrix};
