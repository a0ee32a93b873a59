//! Scenario configuration, team simulation and trajectory logging.

pub mod config;
pub mod engine;
pub mod init;
pub mod log;

pub use config::{validate_config, ConditionCheck, ScenarioConfig, ValidationReport};
pub use engine::{run, Simulation};
pub use log::{LogEvent, RobotRecord, RunStats, Tick, TrajectoryLog};
