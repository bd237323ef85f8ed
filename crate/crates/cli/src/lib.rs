//! Library behind the `userkit` binary: configuration, lattice presets,
//! experiment orchestration and artifact output.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod matrix_file;
pub mod presets;

pub use artifacts::{run_experiment, RunReport};
pub use cli::run_cli;
pub use config::{Emit, ExperimentConfig};
pub use error::CliError;
pub use experiment::Experiment;
pub use presets::preset;
