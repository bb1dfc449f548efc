//! Library surface of the command-line front end, split out so the
//! integration and acceptance suites can drive scenarios in-process.

pub mod commands;
pub mod config;

pub use commands::{run_scenario, CommandOutput};
pub use config::{ExperimentConfig, ScenarioKind};
