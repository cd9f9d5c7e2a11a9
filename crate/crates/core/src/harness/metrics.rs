use serde::{Deserialize, Serialize};

use super::sim::{LegOutcome, TrajectoryLog};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub targets_reached: usize,
    pub targets_assigned: usize,
    /// Time the last waypoint was reached, or the run length if unfinished, s.
    pub time_taken: f64,
    /// Σ‖Δr‖ between logged ticks, m.
    pub distance_traveled: f64,
    /// Σ‖u‖₁/m·dt, m/s.
    pub delta_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_agent: Vec<AgentMetrics>,
    /// Targets, distance and ΔV are summed over agents; time is the run length.
    pub aggregate: AgentMetrics,
    pub completed: bool,
    pub timed_out: bool,
}

pub fn compute_metrics(log: &TrajectoryLog) -> MetricsReport {
    let end = log.end_time();
    let per_agent: Vec<AgentMetrics> = (0..log.agent_count)
        .map(|i| {
            let reached: Vec<f64> =
                log.events.iter().filter(|e| e.agent == i && e.outcome == LegOutcome::Reached).map(|e| e.t).collect();
            let assigned = log.waypoint_counts[i];
            let mut m = AgentMetrics {
                targets_reached: reached.len(),
                targets_assigned: assigned,
                time_taken: if reached.len() == assigned { reached.last().copied().unwrap_or(0.0) } else { end },
                ..Default::default()
            };
            let mut prev: Option<crate::Vec3> = None;
            for r in log.agent_records(i) {
                if let Some(p) = prev {
                    m.distance_traveled += (r.state.pos - p).norm();
                }
                prev = Some(r.state.pos);
                m.delta_v += r.applied.lp_norm(1) / log.mass * log.control_dt;
            }
            m
        })
        .collect();
    let aggregate = AgentMetrics {
        targets_reached: per_agent.iter().map(|m| m.targets_reached).sum(),
        targets_assigned: per_agent.iter().map(|m| m.targets_assigned).sum(),
        time_taken: end,
        distance_traveled: per_agent.iter().map(|m| m.distance_traveled).sum(),
        delta_v: per_agent.iter().map(|m| m.delta_v).sum(),
    };
    MetricsReport {
        completed: aggregate.targets_reached == aggregate.targets_assigned,
        timed_out: log.timed_out,
        per_agent,
        aggregate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{single_agent_passes, three_agent_standoff};
    use crate::harness::sim::run;

    #[test]
    fn instant_completion_has_zero_cost() {
        let mut s = single_agent_passes();
        s.agents[0].waypoints = vec![[-200.0, 0.0, 5.0]];
        let m = compute_metrics(&run(&s).unwrap());
        assert_eq!(m.aggregate, AgentMetrics { targets_reached: 1, targets_assigned: 1, ..Default::default() });
        assert!(m.completed);
    }

    #[test]
    fn aggregate_is_sum_of_agents() {
        let m = compute_metrics(&run(&three_agent_standoff(false)).unwrap());
        let sum = |f: fn(&AgentMetrics) -> f64| m.per_agent.iter().map(f).sum::<f64>();
        assert_eq!(m.aggregate.distance_traveled, sum(|a| a.distance_traveled));
        assert_eq!(m.aggregate.delta_v, sum(|a| a.delta_v));
        assert_eq!(m.aggregate.targets_reached, m.per_agent.iter().map(|a| a.targets_reached).sum::<usize>());
        let max_t = m.per_agent.iter().map(|a| a.time_taken).fold(0.0, f64::max);
        assert!(m.aggregate.time_taken >= max_t);
    }

    #[test]
    fn report_serialises() {
        let m = compute_metrics(&run(&single_agent_passes()).unwrap());
        let text = serde_json::to_string(&m).unwrap();
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
