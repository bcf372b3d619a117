//! Stochastic arrival schedules, baselines, degraded-battery replay and
//! Monte-Carlo sweeps.

pub mod arrivals;
pub mod baseline;
pub mod replay;
pub mod sweep;

pub use arrivals::{generate_arrivals, ArrivalModel};
pub use baseline::{solve_single_sensor_baseline, solve_suboptimal_baseline};
pub use replay::{replay, replay_with_degradation, DegradationScenario, ReplayReport};
pub use sweep::{
    evaluate_schedule, run_member, sweep, ExperimentPoint, Metric, PerEventEnergy, RunMetrics,
    SweepDescriptor, SweepTable, SweepVariable,
};
