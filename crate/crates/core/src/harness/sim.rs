use serde::Serialize;

use super::scenario::{ControllerChoice, DynamicsModel, ScenarioSpec};
use crate::cbf::{self, AgentSnapshot};
use crate::dynamics::{
    eci_to_hill, hill_to_eci, propagate_cwh, propagate_nonlinear_pair, InertialState, RelativeState,
};
use crate::env::{clamp_action, observe};
use crate::policy::{load_policy, Controller};
use crate::{Error, Result, Vec3};

/// One agent at one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub agent: usize,
    pub state: RelativeState,
    /// Controller thrust, N.
    pub desired: Vec3,
    /// Thrust actually applied over the following tick, N.
    pub applied: Vec3,
    pub rta_active: bool,
    /// `[pos, vel, acc, u1, u2, u3]`; zero when the filter is off.
    pub slacks: [f64; 6],
    /// Distance to the active (or, once done, the final) waypoint, m.
    pub dist_goal: f64,
    /// Index of the active waypoint; equals the waypoint count once done.
    pub waypoint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LegOutcome {
    Reached,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegEvent {
    pub agent: usize,
    pub waypoint: usize,
    pub t: f64,
    pub outcome: LegOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub agent_count: usize,
    pub waypoint_counts: Vec<usize>,
    pub control_dt: f64,
    pub mass: f64,
    /// Tick-major: all agents at t₀, then all agents at t₁, …
    pub records: Vec<TickRecord>,
    pub events: Vec<LegEvent>,
    pub timed_out: bool,
    /// Set when propagation failed; the log holds everything up to that tick.
    pub aborted: Option<String>,
}

impl TrajectoryLog {
    pub fn agent_records(&self, agent: usize) -> impl Iterator<Item = &TickRecord> {
        self.records.iter().filter(move |r| r.agent == agent)
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

/// Instantiates the controller named by `choice`.
pub fn load_controller(choice: &ControllerChoice) -> Result<Box<dyn Controller>> {
    Ok(match choice {
        ControllerChoice::Baseline { gains } => Box::new(*gains),
        ControllerChoice::Policy { path } => Box::new(load_policy(path)?),
    })
}

/// Runs `spec` with controllers loaded from its agent entries.
pub fn run(spec: &ScenarioSpec) -> Result<TrajectoryLog> {
    spec.validate()?;
    let controllers = spec.agents.iter().map(|a| load_controller(&a.controller)).collect::<Result<Vec<_>>>()?;
    run_with(spec, &controllers)
}

enum Plant {
    Cwh(Vec<RelativeState>),
    Nonlinear { chief: InertialState, deputies: Vec<InertialState> },
}

impl Plant {
    fn relative(&self) -> Result<Vec<RelativeState>> {
        match self {
            Plant::Cwh(states) => Ok(states.clone()),
            Plant::Nonlinear { chief, deputies } => deputies.iter().map(|d| eci_to_hill(chief, d)).collect(),
        }
    }

    fn advance(&mut self, thrust: &[Vec3], spec: &ScenarioSpec) -> Result<()> {
        let substeps = spec.substeps();
        match self {
            Plant::Cwh(states) => {
                for (s, u) in states.iter_mut().zip(thrust) {
                    *s = propagate_cwh(s, u, spec.control_dt, substeps, &spec.orbit, &spec.vehicle)?;
                }
            }
            Plant::Nonlinear { chief, deputies } => {
                let mut next_chief = *chief;
                for (d, u) in deputies.iter_mut().zip(thrust) {
                    let (c, nd) =
                        propagate_nonlinear_pair(chief, d, u, &spec.vehicle, spec.control_dt, substeps, &spec.orbit)?;
                    next_chief = c;
                    *d = nd;
                }
                *chief = next_chief;
            }
        }
        Ok(())
    }
}

/// Runs `spec` with the given per-agent controllers.
///
/// Each tick: advance waypoint queues, check leg timeouts, query the
/// controllers, optionally filter through the RTA, clamp to the thrust
/// bound, log, then propagate with the thrust held for `control_dt`.
/// Agents that have finished hold station at their last waypoint. The run
/// ends when every queue is empty or any leg times out. A propagation
/// failure stops the run early and is reported in [`TrajectoryLog::aborted`].
pub fn run_with(spec: &ScenarioSpec, controllers: &[Box<dyn Controller>]) -> Result<TrajectoryLog> {
    spec.validate()?;
    let n = spec.agents.len();
    if controllers.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: controllers.len() });
    }
    let veh = spec.vehicle;
    let f_c = veh.thrust_bound;
    let initial: Vec<RelativeState> =
        spec.agents.iter().map(|a| RelativeState::new(Vec3::from(a.start), Vec3::from(a.start_vel))).collect();
    let mut plant = match spec.dynamics {
        DynamicsModel::Cwh => Plant::Cwh(initial),
        DynamicsModel::Nonlinear => {
            let chief = spec.orbit.chief_initial_state();
            let deputies = initial.iter().map(|s| hill_to_eci(&chief, s)).collect::<Result<_>>()?;
            Plant::Nonlinear { chief, deputies }
        }
    };
    let goals: Vec<Vec<Vec3>> =
        spec.agents.iter().map(|a| a.waypoints.iter().map(|w| Vec3::from(*w)).collect()).collect();
    let mut log = TrajectoryLog {
        agent_count: n,
        waypoint_counts: goals.iter().map(Vec::len).collect(),
        control_dt: spec.control_dt,
        mass: veh.mass,
        records: Vec::new(),
        events: Vec::new(),
        timed_out: false,
        aborted: None,
    };
    let mut index = vec![0usize; n];
    let mut leg_start = vec![0.0f64; n];
    let mut prev_vel: Option<Vec<Vec3>> = None;
    let mut tick: u64 = 0;
    loop {
        let t = tick as f64 * spec.control_dt;
        let states = match plant.relative() {
            Ok(s) => s,
            Err(e) => {
                log.aborted = Some(e.to_string());
                break;
            }
        };
        for i in 0..n {
            while index[i] < goals[i].len() && (states[i].pos - goals[i][index[i]]).norm() <= spec.acceptance_radius {
                log.events.push(LegEvent { agent: i, waypoint: index[i], t, outcome: LegOutcome::Reached });
                index[i] += 1;
                leg_start[i] = t;
            }
        }
        let all_done = (0..n).all(|i| index[i] == goals[i].len());
        let mut expired = false;
        for i in 0..n {
            if index[i] < goals[i].len() && t - leg_start[i] >= spec.leg_timeout - 1e-9 {
                log.events.push(LegEvent { agent: i, waypoint: index[i], t, outcome: LegOutcome::Timeout });
                expired = true;
            }
        }
        let active_goal = |i: usize| goals[i][index[i].min(goals[i].len() - 1)];

        if all_done || expired {
            log.timed_out = expired;
            for (i, s) in states.iter().enumerate() {
                log.records.push(TickRecord {
                    t,
                    agent: i,
                    state: *s,
                    desired: Vec3::zeros(),
                    applied: Vec3::zeros(),
                    rta_active: false,
                    slacks: [0.0; 6],
                    dist_goal: (s.pos - active_goal(i)).norm(),
                    waypoint: index[i],
                });
            }
            break;
        }

        let desired: Vec<Vec3> =
            (0..n).map(|i| clamp_action(&controllers[i].act(&observe(&states[i], &active_goal(i)))) * f_c).collect();
        let mut applied = desired.clone();
        let mut active = vec![false; n];
        let mut slacks = vec![[0.0; 6]; n];
        if spec.rta_enabled {
            let snapshots: Vec<AgentSnapshot> = (0..n)
                .map(|i| {
                    let accel = match &prev_vel {
                        Some(v) => (states[i].vel - v[i]) / spec.control_dt,
                        None => Vec3::zeros(),
                    };
                    AgentSnapshot::new(states[i], accel, veh)
                })
                .collect();
            let decisions = cbf::filter(&snapshots, &desired, &[AgentSnapshot::chief()], &spec.orbit, &spec.rta);
            for (i, d) in decisions.iter().enumerate() {
                applied[i] = d.u_safe.map(|u| u.clamp(-f_c, f_c));
                active[i] = d.intervened();
                let u = d.input_slacks();
                slacks[i] = [d.position_slack(), d.velocity_slack(), d.acceleration_slack(), u[0], u[1], u[2]];
            }
        }
        for i in 0..n {
            log.records.push(TickRecord {
                t,
                agent: i,
                state: states[i],
                desired: desired[i],
                applied: applied[i],
                rta_active: active[i],
                slacks: slacks[i],
                dist_goal: (states[i].pos - active_goal(i)).norm(),
                waypoint: index[i],
            });
        }
        prev_vel = Some(states.iter().map(|s| s.vel).collect());
        if let Err(e) = plant.advance(&applied, spec) {
            let e = match e {
                Error::NumericalBlowUp { time } => Error::NumericalBlowUp { time: t + time },
                other => other,
            };
            log.aborted = Some(e.to_string());
            break;
        }
        tick += 1;
    }
    Ok(log)
}
