use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::Vec3;

/// Gains of the analytic proportional-derivative waypoint controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineGains {
    /// 1/s²
    pub kp: f64,
    /// 1/s
    pub kv: f64,
    /// Absolute commanded-speed cap, m/s.
    pub speed_cap: f64,
    /// The commanded speed also stays below `speed_limit_slope · d`
    /// (the reward's variable speed limit, η·σ_μ).
    pub speed_limit_slope: f64,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self { kp: 4e-3, kv: 0.12, speed_cap: 7.0, speed_limit_slope: 0.308 }
    }
}

/// Tracks a velocity command pointing at the goal: `kp/kv · e`, limited to
/// `min(speed_cap, speed_limit_slope · d)`, with gain `kv` on the velocity
/// error. Output is clamped to `[−1, 1]³`.
pub fn baseline_act(obs: &Observation, gains: &BaselineGains) -> Vec3 {
    let to_goal = -obs.scaled_delta * 1000.0;
    let d = to_goal.norm();
    let mut v_cmd = to_goal * (gains.kp / gains.kv);
    let cap = gains.speed_cap.min(gains.speed_limit_slope * d);
    let speed = v_cmd.norm();
    if speed > cap {
        v_cmd *= cap / speed;
    }
    ((v_cmd - obs.vel) * gains.kv).map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) })
}
