//! Ground truth, measurement simulation, metrics and Monte-Carlo scenarios.

pub mod sampling;
pub mod scenario;
pub mod stats;
pub mod target;

pub use sampling::{
    generate_measurement, measurement_count, sample_measurement_source, CountModel, NoiseComponent, SamplingError,
};
pub use scenario::{run_scenario, RunRecord, RunReport, ScenarioConfig, ScenarioError, StepSummary};
pub use target::{GroundTruthTarget, Motion, TargetGeometry, TargetSnapshot, Trajectory};
