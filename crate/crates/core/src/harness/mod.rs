//! Scenario configuration, study drivers and report writers.

pub mod config;
pub mod report;
pub mod studies;

pub use config::ScenarioConfig;
pub use report::{run_command, Command};
pub use studies::{BiasRow, PowerRow, StudyContext};
