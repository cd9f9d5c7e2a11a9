//! Relative-motion dynamics in Hill's frame and a nonlinear inertial
//! reference propagator.
//!
//! Hill's frame is centred on the chief: `x` points radially outward, `z`
//! along the orbital angular momentum and `y` completes the right-handed
//! triad (roughly along-track for a circular orbit).

use nalgebra::{Matrix3, SVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Earth gravitational parameter, m³/s².
pub const MU_EARTH: f64 = 3.986_004_418e14;
/// Earth equatorial radius, m.
pub const R_EARTH: f64 = 6_378_137.0;
/// Earth second zonal harmonic.
pub const J2_EARTH: f64 = 1.082_626_68e-3;
/// Default chief semi-major axis (≈500 km altitude), m.
pub const DEFAULT_SEMI_MAJOR_AXIS: f64 = 6_878_137.0;

type State6 = SVector<f64, 6>;
type State12 = SVector<f64, 12>;

/// Deputy position and velocity relative to the chief, resolved in Hill's frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativeState {
    pub pos: Vec3,
    pub vel: Vec3,
}

impl RelativeState {
    pub fn new(pos: Vec3, vel: Vec3) -> Self {
        Self { pos, vel }
    }

    pub fn at_rest(pos: Vec3) -> Self {
        Self { pos, vel: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).all(|v| v.is_finite())
    }

    fn to_vector(self) -> State6 {
        State6::new(self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z)
    }

    fn from_vector(v: &State6) -> Self {
        Self { pos: Vec3::new(v[0], v[1], v[2]), vel: Vec3::new(v[3], v[4], v[5]) }
    }
}

/// Time derivative of a [`RelativeState`] or [`InertialState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub vel: Vec3,
    pub accel: Vec3,
}

/// Circular reference orbit of the chief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiefOrbit {
    /// rad/s
    pub mean_motion: f64,
    /// m
    pub semi_major_axis: f64,
    /// m³/s²
    pub mu: f64,
    pub j2_enabled: bool,
    pub j2_coefficient: f64,
    /// m
    pub body_radius: f64,
    /// Inclination of the chief orbit plane used when seeding inertial states, rad.
    #[serde(default)]
    pub inclination: f64,
}

impl ChiefOrbit {
    /// Circular Earth orbit of the given semi-major axis, J2 disabled.
    pub fn circular(semi_major_axis: f64) -> Self {
        Self {
            mean_motion: (MU_EARTH / semi_major_axis.powi(3)).sqrt(),
            semi_major_axis,
            mu: MU_EARTH,
            j2_enabled: false,
            j2_coefficient: J2_EARTH,
            body_radius: R_EARTH,
            inclination: 0.0,
        }
    }

    pub fn with_j2(mut self, enabled: bool) -> Self {
        self.j2_enabled = enabled;
        self
    }

    pub fn with_inclination(mut self, inclination: f64) -> Self {
        self.inclination = inclination;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_motion > 0.0 && self.semi_major_axis > 0.0 && self.mu > 0.0) {
            return Err(Error::InvalidParameter("orbit mean motion, semi-major axis and mu must be positive".into()));
        }
        let implied = (self.mu / self.semi_major_axis.powi(3)).sqrt();
        if ((implied - self.mean_motion) / implied).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mean motion {} inconsistent with semi-major axis (expected {implied})",
                self.mean_motion
            )));
        }
        Ok(())
    }

    /// Inertial state of the chief at epoch: on the ascending node of its
    /// circular orbit.
    pub fn chief_initial_state(&self) -> InertialState {
        let speed = (self.mu / self.semi_major_axis).sqrt();
        let (si, ci) = self.inclination.sin_cos();
        InertialState { pos: Vec3::new(self.semi_major_axis, 0.0, 0.0), vel: Vec3::new(0.0, speed * ci, speed * si) }
    }
}

impl Default for ChiefOrbit {
    fn default() -> Self {
        Self::circular(DEFAULT_SEMI_MAJOR_AXIS)
    }
}

/// Mass and per-axis thrust limit of a deputy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// N per axis
    pub thrust_bound: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { mass: 1.0, thrust_bound: 1.0 }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if self.mass > 0.0 && self.thrust_bound > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("vehicle mass and thrust bound must be positive".into()))
        }
    }

    /// Input matrix `g = I / m`.
    pub fn input_gain(&self) -> f64 {
        1.0 / self.mass
    }
}

/// Position and velocity in the Earth-centred inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialState {
    pub pos: Vec3,
    pub vel: Vec3,
}

/// Unforced CWH acceleration `f(δr, δṙ)`.
pub fn cwh_drift(state: &RelativeState, n: f64) -> Vec3 {
    let (r, v) = (&state.pos, &state.vel);
    Vec3::new(3.0 * n * n * r.x + 2.0 * n * v.y, -2.0 * n * v.x, -n * n * r.z)
}

/// CWH state derivative with thrust `u` (N) held for the instant.
pub fn cwh_derivative(state: &RelativeState, u: &Vec3, orbit: &ChiefOrbit, veh: &VehicleParams) -> StateDerivative {
    StateDerivative { vel: state.vel, accel: cwh_drift(state, orbit.mean_motion) + u * veh.input_gain() }
}

fn rk4_step<const N: usize>(
    x: &SVector<f64, N>,
    h: f64,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, N>,
) -> SVector<f64, N> {
    let k1 = f(x);
    let k2 = f(&(x + k1 * (h / 2.0)));
    let k3 = f(&(x + k2 * (h / 2.0)));
    let k4 = f(&(x + k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Fixed-step RK4 propagation of the CWH equations over `dt` with thrust
/// `u` held constant, split into `substeps` equal steps.
pub fn propagate_cwh(
    state: &RelativeState,
    u: &Vec3,
    dt: f64,
    substeps: usize,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
) -> Result<RelativeState> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter(format!(
            "propagation needs dt > 0 and substeps >= 1 (got dt = {dt}, substeps = {substeps})"
        )));
    }
    let h = dt / substeps as f64;
    let deriv = |x: &State6| {
        let d = cwh_derivative(&RelativeState::from_vector(x), u, orbit, veh);
        State6::new(d.vel.x, d.vel.y, d.vel.z, d.accel.x, d.accel.y, d.accel.z)
    };
    let mut x = state.to_vector();
    for k in 0..substeps {
        x = rk4_step(&x, h, deriv);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalBlowUp { time: (k + 1) as f64 * h });
        }
    }
    Ok(RelativeState::from_vector(&x))
}

/// Analytic unforced CWH solution after `dt` seconds.
pub fn cwh_closed_form(state: &RelativeState, dt: f64, n: f64) -> RelativeState {
    let (s, c) = (n * dt).sin_cos();
    let nt = n * dt;
    let (r0, v0) = (&state.pos, &state.vel);
    let pos = Vec3::new(
        (4.0 - 3.0 * c) * r0.x + s / n * v0.x + 2.0 / n * (1.0 - c) * v0.y,
        6.0 * (s - nt) * r0.x + r0.y - 2.0 / n * (1.0 - c) * v0.x + (4.0 * s - 3.0 * nt) / n * v0.y,
        c * r0.z + s / n * v0.z,
    );
    let vel = Vec3::new(
        3.0 * n * s * r0.x + c * v0.x + 2.0 * s * v0.y,
        -6.0 * n * (1.0 - c) * r0.x - 2.0 * s * v0.x + (4.0 * c - 3.0) * v0.y,
        -n * s * r0.z + c * v0.z,
    );
    RelativeState { pos, vel }
}

/// Point-mass gravity plus (optionally) the first-order J2 zonal term.
pub fn gravity_accel(pos: &Vec3, orbit: &ChiefOrbit) -> Result<Vec3> {
    let r = pos.norm();
    if r == 0.0 {
        return Err(Error::ZeroPosition);
    }
    let mut accel = -orbit.mu / (r * r * r) * pos;
    if orbit.j2_enabled {
        let zr2 = (pos.z / r).powi(2);
        let k = -1.5 * orbit.j2_coefficient * orbit.mu * orbit.body_radius.powi(2) / r.powi(5);
        accel += Vec3::new(k * pos.x * (1.0 - 5.0 * zr2), k * pos.y * (1.0 - 5.0 * zr2), k * pos.z * (3.0 - 5.0 * zr2));
    }
    Ok(accel)
}

pub fn two_body_j2_derivative(state: &InertialState, orbit: &ChiefOrbit) -> Result<StateDerivative> {
    Ok(StateDerivative { vel: state.vel, accel: gravity_accel(&state.pos, orbit)? })
}

fn inertial_to_vector(s: &InertialState) -> State6 {
    State6::new(s.pos.x, s.pos.y, s.pos.z, s.vel.x, s.vel.y, s.vel.z)
}

fn inertial_from_slice(v: &[f64]) -> InertialState {
    InertialState { pos: Vec3::new(v[0], v[1], v[2]), vel: Vec3::new(v[3], v[4], v[5]) }
}

/// RK4 propagation of an uncontrolled inertial state.
pub fn propagate_inertial(
    state: &InertialState,
    dt: f64,
    substeps: usize,
    orbit: &ChiefOrbit,
) -> Result<InertialState> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter("propagation needs dt > 0 and substeps >= 1".into()));
    }
    if state.pos.norm() == 0.0 {
        return Err(Error::ZeroPosition);
    }
    let h = dt / substeps as f64;
    let deriv = |x: &State6| {
        let a = gravity_accel(&Vec3::new(x[0], x[1], x[2]), orbit).unwrap_or(Vec3::repeat(f64::NAN));
        State6::new(x[3], x[4], x[5], a.x, a.y, a.z)
    };
    let mut x = inertial_to_vector(state);
    for k in 0..substeps {
        x = rk4_step(&x, h, deriv);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalBlowUp { time: (k + 1) as f64 * h });
        }
    }
    Ok(inertial_from_slice(x.as_slice()))
}

/// Rotation taking inertial components into Hill components, plus the
/// frame's angular velocity (inertial components).
fn hill_basis(chief: &InertialState) -> Result<(Matrix3<f64>, Vec3)> {
    let r = chief.pos.norm();
    if r == 0.0 {
        return Err(Error::ZeroPosition);
    }
    let h = chief.pos.cross(&chief.vel);
    let hn = h.norm();
    if hn == 0.0 || !hn.is_finite() {
        return Err(Error::DegenerateChief);
    }
    let x_hat = chief.pos / r;
    let z_hat = h / hn;
    let y_hat = z_hat.cross(&x_hat);
    let rot = Matrix3::from_rows(&[x_hat.transpose(), y_hat.transpose(), z_hat.transpose()]);
    Ok((rot, h / (r * r)))
}

pub fn eci_to_hill(chief: &InertialState, deputy: &InertialState) -> Result<RelativeState> {
    let (rot, omega) = hill_basis(chief)?;
    let dr = deputy.pos - chief.pos;
    let dv = deputy.vel - chief.vel - omega.cross(&dr);
    Ok(RelativeState { pos: rot * dr, vel: rot * dv })
}

pub fn hill_to_eci(chief: &InertialState, rel: &RelativeState) -> Result<InertialState> {
    let (rot, omega) = hill_basis(chief)?;
    let dr = rot.transpose() * rel.pos;
    let dv = rot.transpose() * rel.vel + omega.cross(&dr);
    Ok(InertialState { pos: chief.pos + dr, vel: chief.vel + dv })
}

/// Jointly propagates a chief and a thrusting deputy under two-body (+J2)
/// gravity. The deputy's thrust `u_hill` is fixed in the rotating Hill frame.
pub fn propagate_nonlinear_pair(
    chief: &InertialState,
    deputy: &InertialState,
    u_hill: &Vec3,
    veh: &VehicleParams,
    dt: f64,
    substeps: usize,
    orbit: &ChiefOrbit,
) -> Result<(InertialState, InertialState)> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter("propagation needs dt > 0 and substeps >= 1".into()));
    }
    hill_basis(chief)?;
    let h = dt / substeps as f64;
    let deriv = |x: &State12| {
        let c = inertial_from_slice(&x.as_slice()[0..6]);
        let d = inertial_from_slice(&x.as_slice()[6..12]);
        let nan = Vec3::repeat(f64::NAN);
        let ac = gravity_accel(&c.pos, orbit).unwrap_or(nan);
        let thrust = match hill_basis(&c) {
            Ok((rot, _)) => rot.transpose() * u_hill * veh.input_gain(),
            Err(_) => nan,
        };
        let ad = gravity_accel(&d.pos, orbit).unwrap_or(nan) + thrust;
        State12::from_column_slice(&[
            c.vel.x, c.vel.y, c.vel.z, ac.x, ac.y, ac.z, d.vel.x, d.vel.y, d.vel.z, ad.x, ad.y, ad.z,
        ])
    };
    let mut x = State12::zeros();
    x.as_mut_slice()[0..6].copy_from_slice(inertial_to_vector(chief).as_slice());
    x.as_mut_slice()[6..12].copy_from_slice(inertial_to_vector(deputy).as_slice());
    for k in 0..substeps {
        x = rk4_step(&x, h, deriv);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalBlowUp { time: (k + 1) as f64 * h });
        }
    }
    Ok((inertial_from_slice(&x.as_slice()[0..6]), inertial_from_slice(&x.as_slice()[6..12])))
}
