//! Scenario execution, metrics and trajectory output.

mod metrics;
mod output;
mod scenario;
mod sim;
mod stats;

pub use metrics::{compute_metrics, AgentMetrics, MetricsReport};
pub use output::{
    crossings, min_separation, pair_distances, plot_data_json, write_trajectory_csv, Crossing, DistanceSeries,
    TRAJECTORY_HEADER,
};
pub use scenario::{
    builtin, ideal_distance, single_agent_passes, three_agent_standoff, AgentSpec, ControllerChoice, DynamicsModel,
    ScenarioSpec,
};
pub use sim::{load_controller, run, run_with, LegEvent, LegOutcome, TickRecord, TrajectoryLog};
pub use stats::{baseline_stats, episode_trials, summarise, TrialStats};

use crate::Result;

/// Runs `spec` and computes its metrics.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<(MetricsReport, TrajectoryLog)> {
    let log = run(spec)?;
    Ok((compute_metrics(&log), log))
}
