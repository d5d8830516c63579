//! Scenario configuration, the closed-loop runner, run records, and metrics.

pub mod config;
pub mod metrics;
pub mod record;
pub mod runner;

pub use config::{
    ControlMethod, EstimatorInit, EstimatorKind, ObjectKind, ScenarioConfig, TargetSpec,
};
pub use metrics::{compute_metrics, compute_ts_bound, Metrics};
pub use record::{RunRecord, Tick, LOG_VERSION};
pub use runner::{propagate_shat, run_scenario, sweep};
