//! Figure scenarios: configuration, simulated device, runners and output
//! files.

pub mod config;
pub mod figures;
pub mod lab;
pub mod locate;
pub mod output;

pub use config::{Diagnostic, ScenarioConfig, ScenarioId};
pub use figures::{run_scenario, ScenarioOutput, Table};
pub use output::{write_outputs, RunRecord};
