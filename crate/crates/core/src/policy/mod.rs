//! Action producers for the waypoint task.

mod baseline;
mod io;
mod mlp;
mod ppo;

pub use baseline::{baseline_act, BaselineGains};
pub use io::{load_policy, policy_from_json, policy_to_json, save_policy, POLICY_FORMAT, POLICY_VERSION};
pub use mlp::{ForwardCache, Linear, Mlp};
pub use ppo::{
    gaussian_log_prob, surrogate_loss, train, train_from, write_learning_curve, CurvePoint, SurrogateSample,
    TrainOutcome, TrainerConfig,
};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::Observation;
use crate::{Error, Result, Vec3};

/// Maps an observation to a normalised action in `[−1, 1]³`.
pub trait Controller: Send + Sync {
    fn act(&self, obs: &Observation) -> Vec3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Deterministic,
    Stochastic,
}

/// Gaussian policy squashed through `tanh`: the network produces the
/// pre-squash mean and `log_std` sets the exploration noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    pub net: Mlp,
    pub log_std: [f64; 3],
}

/// Hidden layer widths used by default.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

impl MlpPolicy {
    pub fn new(net: Mlp, log_std: [f64; 3]) -> Result<Self> {
        let dims = net.dims();
        if dims.first() != Some(&Observation::DIM) || dims.last() != Some(&3) {
            return Err(Error::InvalidParameter(format!("policy dims must run 6 → … → 3, got {dims:?}")));
        }
        Ok(Self { net, log_std })
    }

    pub fn random<R: Rng + ?Sized>(hidden: &[usize], init_log_std: f64, rng: &mut R) -> Self {
        let mut dims = vec![Observation::DIM];
        dims.extend_from_slice(hidden);
        dims.push(3);
        Self { net: Mlp::random(&dims, 0.01, rng), log_std: [init_log_std; 3] }
    }

    pub fn zeros(hidden: &[usize]) -> Self {
        let mut dims = vec![Observation::DIM];
        dims.extend_from_slice(hidden);
        dims.push(3);
        Self { net: Mlp::zeros(&dims), log_std: [0.0; 3] }
    }

    /// Pre-squash mean.
    pub fn mean(&self, obs: &[f64]) -> Vec3 {
        let m = self.net.forward(obs);
        Vec3::new(m[0], m[1], m[2])
    }

    pub fn act_deterministic(&self, obs: &Observation) -> Vec3 {
        self.mean(&obs.to_array()).map(f64::tanh)
    }

    /// Samples a pre-squash action; returns `(pre, tanh(pre))`.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> (Vec3, Vec3) {
        let mean = self.mean(obs);
        let mut pre = Vec3::zeros();
        for k in 0..3 {
            let eps: f64 = rng.sample(StandardNormal);
            pre[k] = mean[k] + self.log_std[k].exp() * eps;
        }
        (pre, pre.map(f64::tanh))
    }
}

impl Controller for MlpPolicy {
    fn act(&self, obs: &Observation) -> Vec3 {
        self.act_deterministic(obs)
    }
}

impl Controller for BaselineGains {
    fn act(&self, obs: &Observation) -> Vec3 {
        baseline_act(obs, self)
    }
}

/// Evaluates `policy` on a raw observation vector.
pub fn policy_act<R: Rng + ?Sized>(policy: &MlpPolicy, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<Vec3> {
    if obs.len() != policy.net.input_dim() {
        return Err(Error::DimensionMismatch { expected: policy.net.input_dim(), got: obs.len() });
    }
    Ok(match mode {
        ActMode::Deterministic => policy.mean(obs).map(f64::tanh),
        ActMode::Stochastic => policy.sample(obs, rng).1,
    })
}
