//! Single-agent waypoint motion-control environment.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_cwh, ChiefOrbit, RelativeState, VehicleParams};
use crate::{Error, Result, Vec3};

/// Acceptance radius used when training, m.
pub const TRAINING_ACCEPTANCE: f64 = 10.0;
/// Acceptance radius used by the scenario harness, m.
pub const SCENARIO_ACCEPTANCE: f64 = 15.0;
/// Episode / leg timeout, s.
pub const DEFAULT_TIMEOUT: f64 = 500.0;

/// One point-to-point leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointTask {
    pub goal: Vec3,
    pub acceptance_radius: f64,
    pub timeout: f64,
}

impl WaypointTask {
    pub fn new(goal: Vec3, acceptance_radius: f64, timeout: f64) -> Result<Self> {
        if !(acceptance_radius > 0.0 && timeout > 0.0) {
            return Err(Error::InvalidParameter("acceptance radius and timeout must be positive".into()));
        }
        Ok(Self { goal, acceptance_radius, timeout })
    }

    pub fn reached(&self, pos: &Vec3) -> bool {
        (pos - self.goal).norm() < self.acceptance_radius
    }
}

/// Goal offset in km and relative velocity in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub scaled_delta: Vec3,
    pub vel: Vec3,
}

impl Observation {
    pub const DIM: usize = 6;

    pub fn to_array(&self) -> [f64; 6] {
        [self.scaled_delta.x, self.scaled_delta.y, self.scaled_delta.z, self.vel.x, self.vel.y, self.vel.z]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::DIM {
            return Err(Error::DimensionMismatch { expected: Self::DIM, got: v.len() });
        }
        Ok(Self { scaled_delta: Vec3::new(v[0], v[1], v[2]), vel: Vec3::new(v[3], v[4], v[5]) })
    }

    /// Distance to the goal, m.
    pub fn distance(&self) -> f64 {
        self.scaled_delta.norm() * 1000.0
    }
}

pub fn observe(state: &RelativeState, goal: &Vec3) -> Observation {
    Observation { scaled_delta: (state.pos - goal) / 1000.0, vel: state.vel }
}

/// Reward coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    /// Speed-limit slope, 1/s.
    pub sigma_mu: f64,
    pub eta: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { alpha: 1e-3, beta: 1e-2, nu: 1e-2, sigma_mu: 0.308, eta: 1.0 }
    }
}

impl RewardParams {
    /// Variable speed limit at distance `d` from the goal.
    pub fn speed_limit(&self, d: f64) -> f64 {
        self.eta * self.sigma_mu * d
    }
}

/// Shaped step reward:
/// `α/(d+1) + β(d_prev − d) − ν‖v‖₁ · [‖v‖ > η σ_μ d]`.
pub fn reward(cur: &Vec3, prev: &Vec3, vel: &Vec3, goal: &Vec3, p: &RewardParams) -> f64 {
    let d = (cur - goal).norm();
    let d_prev = (prev - goal).norm();
    let proximity = p.alpha / (d + 1.0);
    let progress = p.beta * (d_prev - d);
    let penalty = if vel.norm() > p.speed_limit(d) { p.nu * vel.lp_norm(1) } else { 0.0 };
    proximity + progress - penalty
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Control step, s.
    pub dt: f64,
    /// RK4 substeps per control step.
    pub substeps: usize,
    pub timeout: f64,
    pub acceptance_radius: f64,
    pub scale_vector: [f64; 3],
    pub sample_half_extent: f64,
    /// Per-axis out-of-bounds limit, m.
    pub bounds: [f64; 3],
    pub reward: RewardParams,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        let scale = [1.17, 2.5, 1.0];
        let half = 240.0;
        Self {
            dt: 1.0,
            substeps: 10,
            timeout: DEFAULT_TIMEOUT,
            acceptance_radius: TRAINING_ACCEPTANCE,
            scale_vector: scale,
            sample_half_extent: half,
            bounds: [2.0 * scale[0] * half, 2.0 * scale[1] * half, 2.0 * scale[2] * half],
            reward: RewardParams::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.substeps > 0 && self.timeout > 0.0 && self.acceptance_radius > 0.0) {
            return Err(Error::InvalidParameter(
                "episode dt, substeps, timeout and acceptance must be positive".into(),
            ));
        }
        for k in 0..3 {
            if !(self.bounds[k] > self.scale_vector[k].abs() * self.sample_half_extent) {
                return Err(Error::InvalidParameter(format!("bound on axis {k} must exceed the sampling extent")));
            }
        }
        Ok(())
    }

    pub fn task(&self, goal: Vec3) -> WaypointTask {
        WaypointTask { goal, acceptance_radius: self.acceptance_radius, timeout: self.timeout }
    }

    pub fn out_of_bounds(&self, pos: &Vec3) -> bool {
        (0..3).any(|k| pos[k].abs() > self.bounds[k])
    }

    fn scale(&self, x: Vec3) -> Vec3 {
        x.component_mul(&Vec3::from(self.scale_vector))
    }
}

/// Maps two uniform draws in `[−half, half]³` to a start state at rest and a goal.
pub fn episode_from_draws(x: &Vec3, y: &Vec3, cfg: &EpisodeConfig) -> (RelativeState, Vec3) {
    (RelativeState::at_rest(cfg.scale(*x)), cfg.scale(*y))
}

/// Random start (at rest) and goal, each the scale vector times a uniform
/// draw from the sampling cube.
pub fn sample_episode<R: Rng + ?Sized>(rng: &mut R, cfg: &EpisodeConfig) -> (RelativeState, Vec3) {
    let h = cfg.sample_half_extent;
    let mut draw = || Vec3::new(rng.random_range(-h..=h), rng.random_range(-h..=h), rng.random_range(-h..=h));
    let x = draw();
    let y = draw();
    episode_from_draws(&x, &y, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Running,
    Reached,
    OutOfBounds,
    Timeout,
}

impl StepStatus {
    pub fn is_terminal(self) -> bool {
        self != StepStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: RelativeState,
    pub obs: Observation,
    pub reward: f64,
    pub status: StepStatus,
}

pub fn clamp_action(action: &Vec3) -> Vec3 {
    action.map(|a| a.clamp(-1.0, 1.0))
}

/// Applies `action` (scaled by the thrust bound, held for `cfg.dt`) and
/// classifies the result. Reached takes precedence over out-of-bounds,
/// which takes precedence over timeout.
pub fn step(
    state: &RelativeState,
    action: &Vec3,
    task: &WaypointTask,
    cfg: &EpisodeConfig,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
    elapsed: f64,
) -> Result<StepOutcome> {
    if !(elapsed >= 0.0) {
        return Err(Error::InvalidParameter(format!("elapsed time must be nonnegative, got {elapsed}")));
    }
    let u = clamp_action(action) * veh.thrust_bound;
    let next_state = propagate_cwh(state, &u, cfg.dt, cfg.substeps, orbit, veh)?;
    let r = reward(&next_state.pos, &state.pos, &next_state.vel, &task.goal, &cfg.reward);
    let status = if task.reached(&next_state.pos) {
        StepStatus::Reached
    } else if cfg.out_of_bounds(&next_state.pos) {
        StepStatus::OutOfBounds
    } else if elapsed + cfg.dt >= task.timeout {
        StepStatus::Timeout
    } else {
        StepStatus::Running
    };
    Ok(StepOutcome { next_state, obs: observe(&next_state, &task.goal), reward: r, status })
}

/// Summary of one rolled-out episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub status: StepStatus,
    pub steps: usize,
    /// s
    pub time: f64,
    /// Path length sampled at the control rate, m.
    pub distance: f64,
    /// Straight-line distance from start to goal, m.
    pub straight_line: f64,
    /// Σ ‖u‖₁ / m · dt, m/s.
    pub delta_v: f64,
    pub total_reward: f64,
}

/// Runs one episode from `start` toward `goal` with actions from `act`.
/// A start already inside the acceptance ball counts as reached at t = 0.
pub fn run_episode(
    start: &RelativeState,
    goal: &Vec3,
    cfg: &EpisodeConfig,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
    mut act: impl FnMut(&Observation) -> Vec3,
) -> Result<EpisodeResult> {
    let task = cfg.task(*goal);
    let mut result = EpisodeResult {
        status: StepStatus::Running,
        steps: 0,
        time: 0.0,
        distance: 0.0,
        straight_line: (start.pos - goal).norm(),
        delta_v: 0.0,
        total_reward: 0.0,
    };
    if task.reached(&start.pos) {
        result.status = StepStatus::Reached;
        return Ok(result);
    }
    let mut state = *start;
    while !result.status.is_terminal() {
        let action = clamp_action(&act(&observe(&state, goal)));
        let out = step(&state, &action, &task, cfg, orbit, veh, result.time)?;
        result.distance += (out.next_state.pos - state.pos).norm();
        result.delta_v += (action * veh.thrust_bound).lp_norm(1) / veh.mass * cfg.dt;
        result.total_reward += out.reward;
        result.steps += 1;
        result.time += cfg.dt;
        result.status = out.status;
        state = out.next_state;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_map_through_scale_vector() {
        let cfg = EpisodeConfig::default();
        let (s, g) = episode_from_draws(&Vec3::zeros(), &Vec3::zeros(), &cfg);
        assert_eq!(s.pos, Vec3::zeros());
        assert_eq!(g, Vec3::zeros());
        let (s, _) = episode_from_draws(&Vec3::repeat(240.0), &Vec3::zeros(), &cfg);
        assert_relative_eq!(s.pos, Vec3::new(280.8, 600.0, 240.0), epsilon = 1e-12);
        assert_eq!(s.vel, Vec3::zeros());
    }

    #[test]
    fn sampling_distribution() {
        let cfg = EpisodeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let limits = [280.8, 600.0, 240.0];
        let mut sum = Vec3::zeros();
        let mut max = Vec3::repeat(f64::MIN);
        let mut min = Vec3::repeat(f64::MAX);
        for _ in 0..n {
            let (s, g) = sample_episode(&mut rng, &cfg);
            for p in [s.pos, g] {
                for k in 0..3 {
                    assert!(p[k].abs() <= limits[k] + 1e-9);
                }
                sum += p;
                max = max.sup(&p);
                min = min.inf(&p);
            }
        }
        let mean = sum / (2 * n) as f64;
        for k in 0..3 {
            // Standard error of the mean is limit/√(3·2n) ≈ 0.004·limit.
            assert!(mean[k].abs() < 0.02 * limits[k], "axis {k} mean {}", mean[k]);
            assert!(max[k] > 0.98 * limits[k] && min[k] < -0.98 * limits[k]);
        }
    }

    #[test]
    fn observation_examples() {
        let goal = Vec3::new(10.0, 20.0, 30.0);
        let o = observe(&RelativeState::at_rest(goal), &goal);
        assert_eq!(o.to_array(), [0.0; 6]);
        let s = RelativeState::new(goal + Vec3::new(1000.0, -500.0, 0.0), Vec3::new(1.0, 2.0, 3.0));
        let o = observe(&s, &goal);
        assert_eq!(o.to_array(), [1.0, -0.5, 0.0, 1.0, 2.0, 3.0]);
        let shift = Vec3::new(-7.0, 3.5, 100.0);
        let shifted = observe(&RelativeState::new(s.pos + shift, s.vel), &(goal + shift));
        assert_relative_eq!(shifted.scaled_delta, o.scaled_delta, epsilon = 1e-15);
        assert!(Observation::from_slice(&[0.0; 5]).is_err());
    }

    #[test]
    fn reward_examples() {
        let p = RewardParams::default();
        let g = Vec3::new(3.0, 4.0, 5.0);
        assert_relative_eq!(reward(&g, &g, &Vec3::zeros(), &g, &p), 1e-3, epsilon = 1e-12);

        let cur = Vec3::new(100.0, 0.0, 0.0);
        let prev = Vec3::new(101.0, 0.0, 0.0);
        let r = reward(&cur, &prev, &Vec3::new(0.1, 0.0, 0.0), &Vec3::zeros(), &p);
        assert_relative_eq!(r, 1e-3 / 101.0 + 1e-2, epsilon = 1e-12);
        assert_relative_eq!(r, 1.0009901e-2, epsilon = 1e-9);

        let one = Vec3::new(1.0, 0.0, 0.0);
        let r = reward(&one, &one, &Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), &p);
        assert_relative_eq!(r, -1.95e-2, epsilon = 1e-12);
    }

    #[test]
    fn penalty_uses_one_norm_magnitude() {
        let p = RewardParams::default();
        let one = Vec3::new(1.0, 0.0, 0.0);
        let r = reward(&one, &one, &Vec3::new(1.0, -1.0, 1.0), &Vec3::zeros(), &p);
        assert_relative_eq!(r, 5e-4 - 3e-2, epsilon = 1e-15);
    }

    #[test]
    fn step_clamps_and_classifies() {
        let cfg = EpisodeConfig::default();
        let o = ChiefOrbit::default();
        let veh = VehicleParams::default();
        let task = cfg.task(Vec3::new(300.0, 0.0, 0.0));
        let s = RelativeState::at_rest(Vec3::new(-100.0, 0.0, 0.0));
        let a = step(&s, &Vec3::new(2.0, 0.0, 0.0), &task, &cfg, &o, &veh, 0.0).unwrap();
        let b = step(&s, &Vec3::new(1.0, 0.0, 0.0), &task, &cfg, &o, &veh, 0.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.status, StepStatus::Running);

        let at_goal = RelativeState::at_rest(task.goal);
        let r = step(&at_goal, &Vec3::new(-1.0, 1.0, 0.5), &task, &cfg, &o, &veh, 0.0).unwrap();
        assert_eq!(r.status, StepStatus::Reached);

        let t = step(&s, &Vec3::zeros(), &task, &cfg, &o, &veh, 499.5).unwrap();
        assert_eq!(t.status, StepStatus::Timeout);
        let t = step(&at_goal, &Vec3::zeros(), &task, &cfg, &o, &veh, 499.5).unwrap();
        assert_eq!(t.status, StepStatus::Reached);

        let edge = RelativeState::new(Vec3::new(561.0, 0.0, 0.0), Vec3::new(5.0, 0.0, 0.0));
        let oob = step(&edge, &Vec3::zeros(), &task, &cfg, &o, &veh, 499.5).unwrap();
        assert_eq!(oob.status, StepStatus::OutOfBounds);
        assert!(step(&s, &Vec3::zeros(), &task, &cfg, &o, &veh, -1.0).is_err());
    }

    #[test]
    fn episode_starting_at_goal_is_instant() {
        let cfg = EpisodeConfig::default();
        let g = Vec3::new(5.0, 0.0, 0.0);
        let r = run_episode(
            &RelativeState::at_rest(Vec3::zeros()),
            &g,
            &cfg,
            &ChiefOrbit::default(),
            &VehicleParams::default(),
            |_| Vec3::zeros(),
        )
        .unwrap();
        assert_eq!((r.status, r.steps, r.time), (StepStatus::Reached, 0, 0.0));
    }

    #[test]
    fn idle_episode_times_out() {
        let cfg = EpisodeConfig::default();
        let r = run_episode(
            &RelativeState::at_rest(Vec3::new(0.0, 100.0, 0.0)),
            &Vec3::new(0.0, -100.0, 0.0),
            &cfg,
            &ChiefOrbit::default(),
            &VehicleParams::default(),
            |_| Vec3::zeros(),
        )
        .unwrap();
        assert_eq!(r.status, StepStatus::Timeout);
        assert_eq!(r.steps, 500);
        assert_eq!(r.delta_v, 0.0);
    }

    #[test]
    fn config_validation() {
        EpisodeConfig::default().validate().unwrap();
        let bad = EpisodeConfig { bounds: [100.0, 1200.0, 480.0], ..EpisodeConfig::default() };
        assert!(bad.validate().is_err());
        assert!(WaypointTask::new(Vec3::zeros(), 0.0, 1.0).is_err());
    }
}
