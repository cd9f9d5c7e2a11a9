use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cbf::RtaParams;
use crate::dynamics::{ChiefOrbit, VehicleParams};
use crate::env::{DEFAULT_TIMEOUT, SCENARIO_ACCEPTANCE};
use crate::policy::BaselineGains;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerChoice {
    Baseline {
        #[serde(default)]
        gains: BaselineGains,
    },
    Policy {
        path: PathBuf,
    },
}

impl Default for ControllerChoice {
    fn default() -> Self {
        ControllerChoice::Baseline { gains: BaselineGains::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsModel {
    /// Linearised CWH equations.
    #[default]
    Cwh,
    /// Chief and deputies propagated as inertial two-body (+J2) states.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// m, Hill frame
    pub start: [f64; 3],
    #[serde(default)]
    pub start_vel: [f64; 3],
    pub waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pub controller: ControllerChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub agents: Vec<AgentSpec>,
    pub rta_enabled: bool,
    #[serde(default)]
    pub rta: RtaParams,
    /// Zero-order-hold control period, s.
    pub control_dt: f64,
    /// Integration step, s.
    pub sim_dt: f64,
    pub acceptance_radius: f64,
    /// Per-leg timeout, s.
    pub leg_timeout: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub orbit: ChiefOrbit,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub dynamics: DynamicsModel,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::Config("scenario has no agents".into()));
        }
        if self.agents.iter().any(|a| a.waypoints.is_empty()) {
            return Err(Error::Config("every agent needs at least one waypoint".into()));
        }
        if !(self.control_dt > 0.0 && self.sim_dt > 0.0 && self.sim_dt <= self.control_dt) {
            return Err(Error::Config(format!(
                "need 0 < sim_dt <= control_dt (got sim_dt = {}, control_dt = {})",
                self.sim_dt, self.control_dt
            )));
        }
        if !(self.acceptance_radius > 0.0 && self.leg_timeout > 0.0) {
            return Err(Error::Config("acceptance radius and leg timeout must be positive".into()));
        }
        let finite = self
            .agents
            .iter()
            .flat_map(|a| a.start.iter().chain(&a.start_vel).chain(a.waypoints.iter().flatten()))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("agent states and waypoints must be finite".into()));
        }
        self.orbit.validate()?;
        self.vehicle.validate()?;
        if self.rta_enabled {
            self.rta.validate()?;
        }
        Ok(())
    }

    /// RK4 substeps per control tick.
    pub fn substeps(&self) -> usize {
        ((self.control_dt / self.sim_dt).round() as usize).max(1)
    }

    pub fn total_waypoints(&self) -> usize {
        self.agents.iter().map(|a| a.waypoints.len()).sum()
    }

    /// The same scenario flown by agent `index` alone.
    pub fn solo(&self, index: usize) -> Self {
        Self {
            name: format!("{}-solo-{}", self.name, index + 1),
            agents: vec![self.agents[index].clone()],
            ..self.clone()
        }
    }

    pub fn with_controller(mut self, controller: ControllerChoice) -> Self {
        for a in &mut self.agents {
            a.controller = controller.clone();
        }
        self
    }

    fn base(name: &str, agents: Vec<AgentSpec>, rta_enabled: bool) -> Self {
        Self {
            name: name.into(),
            agents,
            rta_enabled,
            rta: RtaParams::default(),
            control_dt: 1.0,
            sim_dt: 0.1,
            acceptance_radius: SCENARIO_ACCEPTANCE,
            leg_timeout: DEFAULT_TIMEOUT,
            seed: 0,
            orbit: ChiefOrbit::default(),
            vehicle: VehicleParams::default(),
            dynamics: DynamicsModel::Cwh,
        }
    }
}

fn alternating(goal: [f64; 3], count: usize) -> Vec<[f64; 3]> {
    (0..count).map(|k| if k % 2 == 0 { goal } else { goal.map(|v| -v) }).collect()
}

/// One deputy starting at (−200, 0, 0) m flying two back-and-forth passes
/// between (±300, 0, 0) m.
pub fn single_agent_passes() -> ScenarioSpec {
    let agent = AgentSpec {
        start: [-200.0, 0.0, 0.0],
        start_vel: [0.0; 3],
        waypoints: alternating([300.0, 0.0, 0.0], 4),
        controller: ControllerChoice::default(),
    };
    ScenarioSpec::base("single", vec![agent], false)
}

/// Two deputies on orthogonal back-and-forth passes whose straight-line
/// paths cross each other and the chief at the origin.
pub fn three_agent_standoff(rta: bool) -> ScenarioSpec {
    let agents = vec![
        AgentSpec {
            start: [-200.0, 0.0, 0.0],
            start_vel: [0.0; 3],
            waypoints: alternating([300.0, 0.0, 0.0], 4),
            controller: ControllerChoice::default(),
        },
        AgentSpec {
            start: [0.0, -200.0, 0.0],
            start_vel: [0.0; 3],
            waypoints: alternating([0.0, 300.0, 0.0], 4),
            controller: ControllerChoice::default(),
        },
    ];
    ScenarioSpec::base("standoff", agents, rta)
}

/// Looks up a built-in scenario by name.
pub fn builtin(name: &str, rta: bool) -> Result<ScenarioSpec> {
    match name {
        "single" | "single_agent_passes" | "exp1" => Ok(single_agent_passes()),
        "standoff" | "three_agent_standoff" | "exp2" | "exp3" => Ok(three_agent_standoff(rta || name == "exp3")),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Sum of straight-line leg lengths from each agent's start through its waypoints.
pub fn ideal_distance(spec: &ScenarioSpec) -> f64 {
    spec.agents
        .iter()
        .map(|a| {
            let mut prev = a.start;
            a.waypoints
                .iter()
                .map(|w| {
                    let d = (0..3).map(|k| (w[k] - prev[k]).powi(2)).sum::<f64>().sqrt();
                    prev = *w;
                    d
                })
                .sum::<f64>()
        })
        .sum()
}
