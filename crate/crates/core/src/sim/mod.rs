//! Scenario orchestration: configuration, presets, execution, metrics and
//! output files.

pub mod config;
pub mod metrics;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{ControllerKind, EstimatorMode, ScenarioConfig};
pub use metrics::{compute_metrics, Summary};
pub use output::{write_outputs, write_timeseries};
pub use presets::{preset, preset_names};
pub use runner::{run_scenario, RunResult, StepRecord};
