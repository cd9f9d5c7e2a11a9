use std::io::Write;

use serde::Serialize;

use super::sim::{LegEvent, TrajectoryLog};
use crate::Result;

pub const TRAJECTORY_HEADER: [&str; 22] = [
    "t",
    "agent",
    "rx",
    "ry",
    "rz",
    "vx",
    "vy",
    "vz",
    "ux_des",
    "uy_des",
    "uz_des",
    "ux",
    "uy",
    "uz",
    "rta_active",
    "slack_pos",
    "slack_vel",
    "slack_acc",
    "slack_u1",
    "slack_u2",
    "slack_u3",
    "dist_goal",
];

/// Writes one CSV row per agent per tick. Agents are numbered from 1.
pub fn write_trajectory_csv<W: Write>(log: &TrajectoryLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in &log.records {
        let mut row = vec![r.t.to_string(), (r.agent + 1).to_string()];
        let (s, d, a) = (&r.state, &r.desired, &r.applied);
        for v in s.pos.iter().chain(s.vel.iter()).chain(d.iter()).chain(a.iter()) {
            // `+ 0.0` folds −0 into 0.
            row.push((v + 0.0).to_string());
        }
        row.push(u8::from(r.rta_active).to_string());
        row.extend(r.slacks.iter().map(|v| (v + 0.0).to_string()));
        row.push((r.dist_goal + 0.0).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Closest approach between two bodies; body 0 is the chief, agents are 1…n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub a: usize,
    pub b: usize,
    pub t: f64,
    pub distance: f64,
}

/// `(t, distance)` samples for one body pair.
pub type DistanceSeries = Vec<(f64, f64)>;

/// Pairwise distance series, keyed by body pair (chief = 0).
pub fn pair_distances(log: &TrajectoryLog) -> Vec<((usize, usize), DistanceSeries)> {
    let n = log.agent_count;
    let ticks: Vec<&[super::sim::TickRecord]> = log.records.chunks(n).collect();
    let mut out = Vec::new();
    for a in 0..=n {
        for b in (a + 1)..=n {
            let series = ticks
                .iter()
                .map(|tick| {
                    let pb = tick[b - 1].state.pos;
                    let d = if a == 0 { pb.norm() } else { (tick[a - 1].state.pos - pb).norm() };
                    (tick[0].t, d)
                })
                .collect();
            out.push(((a, b), series));
        }
    }
    out
}

/// Local minima of every pairwise distance series.
pub fn crossings(log: &TrajectoryLog) -> Vec<Crossing> {
    let mut out = Vec::new();
    for ((a, b), s) in pair_distances(log) {
        for k in 1..s.len().saturating_sub(1) {
            if s[k].1 < s[k - 1].1 && s[k].1 <= s[k + 1].1 {
                out.push(Crossing { a, b, t: s[k].0, distance: s[k].1 });
            }
        }
    }
    out.sort_by(|x, y| x.t.total_cmp(&y.t));
    out
}

/// Smallest distance between any two bodies (chief included) over the run.
pub fn min_separation(log: &TrajectoryLog) -> f64 {
    pair_distances(log).into_iter().flat_map(|(_, s)| s.into_iter().map(|(_, d)| d)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Serialize)]
struct AgentSeries {
    agent: usize,
    t: Vec<f64>,
    pos: Vec<[f64; 3]>,
    speed: Vec<f64>,
    thrust: Vec<[f64; 3]>,
    rta_active: Vec<bool>,
}

#[derive(Debug, Serialize)]
struct PairSeries {
    a: usize,
    b: usize,
    distance: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct PlotData<'a> {
    agents: Vec<AgentSeries>,
    pair_distances: Vec<PairSeries>,
    crossings: Vec<Crossing>,
    events: &'a [LegEvent],
}

/// Plot-ready JSON: per-agent paths, speeds and thrust, pairwise distances,
/// closest approaches and waypoint events.
pub fn plot_data_json(log: &TrajectoryLog) -> String {
    let agents = (0..log.agent_count)
        .map(|i| {
            let recs: Vec<_> = log.agent_records(i).collect();
            AgentSeries {
                agent: i + 1,
                t: recs.iter().map(|r| r.t).collect(),
                pos: recs.iter().map(|r| r.state.pos.into()).collect(),
                speed: recs.iter().map(|r| r.state.vel.norm()).collect(),
                thrust: recs.iter().map(|r| r.applied.into()).collect(),
                rta_active: recs.iter().map(|r| r.rta_active).collect(),
            }
        })
        .collect();
    let pairs = pair_distances(log)
        .into_iter()
        .map(|((a, b), s)| PairSeries { a, b, distance: s.into_iter().map(|(_, d)| d).collect() })
        .collect();
    let data = PlotData { agents, pair_distances: pairs, crossings: crossings(log), events: &log.events };
    serde_json::to_string(&data).expect("plot data serialises")
}
