//! Runtime assurance filter built from control barrier functions.
//!
//! Each deputy solves its own relaxed minimum-intervention QP over its
//! thrust `u` and one slack per constraint row:
//!
//! ```text
//!     minimize    ‖u − a‖² + γ₃ ‖φ‖²
//!     subject to  ḧ_ij + (γ₀+γ₁) ḣ_ij + γ₀γ₁ h_ij ≥ φ_ij     (every peer j)
//!                 ḃ + γ₂ b                      ≥ φ_v
//!                 a_c² − r̈ᵀ(f + g u)            ≥ φ_a
//!                 f_c − |u_k|                   ≥ φ_u,k      (k = 1..3)
//! ```
//!
//! where `h_ij` is the squared-distance barrier to peer `j` (the chief is a
//! peer with zero state) and `b` the speed barrier. Every row is affine in
//! `u`; a [`ConstraintRow`] stores it as `value(u) = coeff_u · u + rhs`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{cwh_drift, ChiefOrbit, RelativeState, VehicleParams};
use crate::qp::{self, QpProblem, QpStatus};
use crate::Vec3;

/// Barrier gains and physical limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtaParams {
    /// Collision radius, m.
    pub r_c: f64,
    /// Speed limit, m/s.
    pub v_c: f64,
    /// Acceleration limit, m/s².
    pub a_c: f64,
    /// Per-axis thrust bound, N.
    pub f_c: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Slack penalty weight.
    pub gamma3: f64,
}

impl Default for RtaParams {
    fn default() -> Self {
        Self { r_c: 50.0, v_c: 3.0, a_c: 1.732, f_c: 1.0, gamma0: 0.1, gamma1: 0.1, gamma2: 1.0, gamma3: 1e6 }
    }
}

impl RtaParams {
    pub fn validate(&self) -> crate::Result<()> {
        let all = [self.r_c, self.v_c, self.a_c, self.f_c, self.gamma0, self.gamma1, self.gamma2, self.gamma3];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(crate::Error::InvalidParameter("RTA parameters must be finite and positive".into()))
        }
    }
}

/// What one agent looks like to the filter at a control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSnapshot {
    pub state: RelativeState,
    /// Measured or estimated acceleration, m/s².
    pub accel_est: Vec3,
    pub veh: VehicleParams,
}

impl AgentSnapshot {
    pub fn new(state: RelativeState, accel_est: Vec3, veh: VehicleParams) -> Self {
        Self { state, accel_est, veh }
    }

    /// The chief sits at the origin of Hill's frame with zero velocity and
    /// acceleration.
    pub fn chief() -> Self {
        Self { state: RelativeState::default(), accel_est: Vec3::zeros(), veh: VehicleParams::default() }
    }
}

/// Who a position row keeps the agent away from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeerId {
    Agent(usize),
    Obstacle(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Position(PeerId),
    Velocity,
    Acceleration,
    /// `sign · u_axis ≤ f_c − φ`
    Input {
        axis: usize,
        sign: i8,
    },
}

/// Affine constraint `coeff_u · u + rhs ≥ φ[slack]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub coeff_u: Vec3,
    pub slack: usize,
    pub rhs: f64,
    pub label: RowLabel,
}

impl ConstraintRow {
    pub fn value(&self, u: &Vec3) -> f64 {
        self.coeff_u.dot(u) + self.rhs
    }
}

/// `h = ½(‖r_i − r_j‖² − r_c²)`
pub fn pos_barrier(ri: &Vec3, rj: &Vec3, r_c: f64) -> f64 {
    0.5 * ((ri - rj).norm_squared() - r_c * r_c)
}

/// `ḣ = (r_i − r_j)ᵀ(v_i − v_j)`
pub fn pos_barrier_dot(ri: &Vec3, rj: &Vec3, vi: &Vec3, vj: &Vec3) -> f64 {
    (ri - rj).dot(&(vi - vj))
}

/// `b = ½(v_c² − ‖v‖²)`
pub fn vel_barrier(v: &Vec3, v_c: f64) -> f64 {
    0.5 * (v_c * v_c - v.norm_squared())
}

/// Second-order position barrier row of agent `i` against peer `j`.
pub fn pos_hocbf_row(
    agent: &AgentSnapshot,
    peer: &AgentSnapshot,
    peer_id: PeerId,
    slack: usize,
    orbit: &ChiefOrbit,
    params: &RtaParams,
) -> ConstraintRow {
    let (ri, vi) = (&agent.state.pos, &agent.state.vel);
    let (rj, vj) = (&peer.state.pos, &peer.state.vel);
    let dr = ri - rj;
    let h = pos_barrier(ri, rj, params.r_c);
    let h_dot = pos_barrier_dot(ri, rj, vi, vj);
    let drift = cwh_drift(&agent.state, orbit.mean_motion);
    let g0 = params.gamma0;
    let g1 = params.gamma1;
    let rhs = (vi - vj).norm_squared() - dr.dot(&peer.accel_est) + dr.dot(&drift) + (g0 + g1) * h_dot + g0 * g1 * h;
    ConstraintRow { coeff_u: dr * agent.veh.input_gain(), slack, rhs, label: RowLabel::Position(peer_id) }
}

/// Speed barrier row `ḃ + γ₂ b ≥ φ_v`.
pub fn vel_row(agent: &AgentSnapshot, slack: usize, orbit: &ChiefOrbit, params: &RtaParams) -> ConstraintRow {
    let v = &agent.state.vel;
    let drift = cwh_drift(&agent.state, orbit.mean_motion);
    ConstraintRow {
        coeff_u: -v * agent.veh.input_gain(),
        slack,
        rhs: -v.dot(&drift) + params.gamma2 * vel_barrier(v, params.v_c),
        label: RowLabel::Velocity,
    }
}

/// Acceleration row `a_c² − r̈ᵀ(f + g u) ≥ φ_a`.
pub fn acc_row(agent: &AgentSnapshot, slack: usize, orbit: &ChiefOrbit, params: &RtaParams) -> ConstraintRow {
    let drift = cwh_drift(&agent.state, orbit.mean_motion);
    ConstraintRow {
        coeff_u: -agent.accel_est * agent.veh.input_gain(),
        slack,
        rhs: params.a_c * params.a_c - agent.accel_est.dot(&drift),
        label: RowLabel::Acceleration,
    }
}

/// Box rows `f_c ∓ u_k ≥ φ_u,k`; both rows of an axis share one slack.
pub fn input_rows(first_slack: usize, params: &RtaParams) -> Vec<ConstraintRow> {
    let mut rows = Vec::with_capacity(6);
    for axis in 0..3 {
        for sign in [1i8, -1] {
            let mut coeff = Vec3::zeros();
            coeff[axis] = -f64::from(sign);
            rows.push(ConstraintRow {
                coeff_u: coeff,
                slack: first_slack + axis,
                rhs: params.f_c,
                label: RowLabel::Input { axis, sign },
            });
        }
    }
    rows
}

/// All constraint rows of one agent. Slack layout: one per peer, then
/// velocity, acceleration and the three input axes.
pub fn build_rows(
    agent: &AgentSnapshot,
    peers: &[(PeerId, AgentSnapshot)],
    orbit: &ChiefOrbit,
    params: &RtaParams,
) -> Vec<ConstraintRow> {
    let p = peers.len();
    let mut rows: Vec<ConstraintRow> =
        peers.iter().enumerate().map(|(k, (id, peer))| pos_hocbf_row(agent, peer, *id, k, orbit, params)).collect();
    rows.push(vel_row(agent, p, orbit, params));
    rows.push(acc_row(agent, p + 1, orbit, params));
    rows.extend(input_rows(p + 2, params));
    rows
}

/// Number of slack variables for an agent with `peers` position rows.
pub fn slack_count(peers: usize) -> usize {
    peers + 5
}

/// Relaxed QP over `x = [u; φ]`.
pub fn build_qp(rows: &[ConstraintRow], peers: usize, desired: &Vec3, params: &RtaParams) -> QpProblem {
    let ns = slack_count(peers);
    let dim = 3 + ns;
    let mut weights = vec![1.0; 3];
    weights.extend(std::iter::repeat_n(params.gamma3, ns));
    let mut center = vec![desired.x, desired.y, desired.z];
    center.extend(std::iter::repeat_n(0.0, ns));
    let mut qp = QpProblem::new(weights, center);
    for row in rows {
        // coeff·u + rhs ≥ φ  ⇔  −coeff·u + φ ≤ rhs
        let mut coeffs = vec![0.0; dim];
        coeffs[..3].copy_from_slice((-row.coeff_u).as_slice());
        coeffs[3 + row.slack] = 1.0;
        qp.push_row(coeffs, row.rhs);
    }
    qp
}

/// Filter output for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RtaDecision {
    pub u_safe: Vec3,
    pub desired: Vec3,
    /// `[φ_pos.., φ_v, φ_a, φ_u1, φ_u2, φ_u3]`
    pub slacks: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
    /// Row value at `u_safe`.
    pub margins: Vec<f64>,
    /// Rows with a positive multiplier.
    pub active: Vec<bool>,
    pub status: QpStatus,
    /// The solver failed and zero thrust was substituted.
    pub fallback: bool,
}

impl RtaDecision {
    pub fn peer_count(&self) -> usize {
        self.slacks.len() - 5
    }

    /// Most negative position slack (0 with no peers).
    pub fn position_slack(&self) -> f64 {
        self.slacks[..self.peer_count()].iter().copied().fold(0.0, f64::min)
    }

    pub fn velocity_slack(&self) -> f64 {
        self.slacks[self.peer_count()]
    }

    pub fn acceleration_slack(&self) -> f64 {
        self.slacks[self.peer_count() + 1]
    }

    pub fn input_slacks(&self) -> [f64; 3] {
        let p = self.peer_count();
        [self.slacks[p + 2], self.slacks[p + 3], self.slacks[p + 4]]
    }

    /// The filter changed the command.
    pub fn intervened(&self) -> bool {
        self.fallback || (self.u_safe - self.desired).amax() > 1e-6
    }
}

/// Solves the relaxed QP for one agent.
pub fn filter_agent(
    agent: &AgentSnapshot,
    peers: &[(PeerId, AgentSnapshot)],
    desired: &Vec3,
    orbit: &ChiefOrbit,
    params: &RtaParams,
) -> RtaDecision {
    let rows = build_rows(agent, peers, orbit, params);
    let qp = build_qp(&rows, peers.len(), desired, params);
    let sol = qp::solve(&qp, qp::DEFAULT_TOL, qp::DEFAULT_MAX_ITER);
    let ns = slack_count(peers.len());
    let (u_safe, slacks, fallback) = if sol.status == QpStatus::Optimal {
        (Vec3::new(sol.x[0], sol.x[1], sol.x[2]), sol.x[3..].to_vec(), false)
    } else {
        (Vec3::zeros(), vec![0.0; ns], true)
    };
    let margins = rows.iter().map(|r| r.value(&u_safe)).collect();
    let active = if fallback { vec![false; rows.len()] } else { sol.multipliers.iter().map(|m| *m > 1e-9).collect() };
    RtaDecision { u_safe, desired: *desired, slacks, rows, margins, active, status: sol.status, fallback }
}

/// Filters every agent's desired thrust. Each agent treats the other agents
/// and every entry of `obstacles` (e.g. the chief) as peers, using their
/// snapshots' acceleration estimates as known.
pub fn filter(
    agents: &[AgentSnapshot],
    desired: &[Vec3],
    obstacles: &[AgentSnapshot],
    orbit: &ChiefOrbit,
    params: &RtaParams,
) -> Vec<RtaDecision> {
    assert_eq!(agents.len(), desired.len(), "one desired action per agent");
    agents
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let peers: Vec<(PeerId, AgentSnapshot)> = agents
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, s)| (PeerId::Agent(j), *s))
                .chain(obstacles.iter().enumerate().map(|(k, s)| (PeerId::Obstacle(k), *s)))
                .collect();
            filter_agent(agent, &peers, &desired[i], orbit, params)
        })
        .collect()
}
