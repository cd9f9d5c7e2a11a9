//! Clipped-surrogate policy-gradient trainer (PPO) with generalised
//! advantage estimation, written against [`Mlp`]'s manual backprop.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{ForwardCache, Mlp};
use super::{MlpPolicy, DEFAULT_HIDDEN};
use crate::dynamics::{ChiefOrbit, RelativeState, VehicleParams};
use crate::env::{observe, sample_episode, step, EpisodeConfig, StepStatus};
use crate::{Error, Result, Vec3};

const LOG_STD_MIN: f64 = -3.0;
const LOG_STD_MAX: f64 = 1.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub total_steps: usize,
    /// Environment steps per policy update.
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub epochs_per_batch: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            total_steps: 1_000_000,
            batch_size: 4096,
            minibatch_size: 256,
            learning_rate: 3e-4,
            discount: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            epochs_per_batch: 10,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            init_log_std: -0.5,
            hidden: DEFAULT_HIDDEN.to_vec(),
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.batch_size > 0
            && self.minibatch_size > 0
            && self.epochs_per_batch > 0
            && self.learning_rate > 0.0
            && self.discount > 0.0
            && self.discount <= 1.0
            && self.gae_lambda > 0.0
            && self.gae_lambda <= 1.0
            && self.max_grad_norm > 0.0
            && self.entropy_coef >= 0.0
            && !self.hidden.is_empty()
            && self.hidden.iter().all(|h| *h > 0);
        if !positive {
            return Err(Error::InvalidParameter("trainer sizes, rates and factors must be positive".into()));
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(Error::InvalidParameter("clip_ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub env_steps: usize,
    /// Episodes that finished during this iteration's rollout.
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_std: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: MlpPolicy,
    pub curve: Vec<CurvePoint>,
}

/// Stored transition for the surrogate objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSample {
    pub obs: [f64; 6],
    /// Pre-squash action.
    pub pre: Vec3,
    pub logp_old: f64,
    pub advantage: f64,
}

/// Diagonal Gaussian log-density of the pre-squash action. The `tanh`
/// Jacobian depends only on `pre` and cancels in probability ratios.
pub fn gaussian_log_prob(pre: &Vec3, mean: &Vec3, log_std: &[f64; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let z = (pre[k] - mean[k]) / log_std[k].exp();
            -0.5 * z * z - log_std[k] - HALF_LN_2PI
        })
        .sum()
}

/// Mean clipped-surrogate loss over `samples` (negated, so lower is
/// better), minus `entropy_coef` times the Gaussian entropy, with its
/// gradient with respect to the network parameters and `log_std`.
pub fn surrogate_loss(
    policy: &MlpPolicy,
    samples: &[SurrogateSample],
    clip_ratio: f64,
    entropy_coef: f64,
) -> (f64, Vec<f64>, [f64; 3]) {
    let mut grad = vec![0.0; policy.net.param_count()];
    let mut grad_log_std = [0.0; 3];
    let mut loss = 0.0;
    let mut cache = ForwardCache::default();
    let inv_n = 1.0 / samples.len().max(1) as f64;
    let std: Vec<f64> = policy.log_std.iter().map(|l| l.exp()).collect();
    for s in samples {
        policy.net.forward_cached(&s.obs, &mut cache);
        let out = cache.output();
        let mean = Vec3::new(out[0], out[1], out[2]);
        let logp = gaussian_log_prob(&s.pre, &mean, &policy.log_std);
        let ratio = (logp - s.logp_old).exp();
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio) * s.advantage;
        loss -= unclipped.min(clipped) * inv_n;
        // Only the unclipped branch carries gradient.
        if unclipped > clipped {
            continue;
        }
        let dlogp = -ratio * s.advantage * inv_n;
        let mut grad_mean = [0.0; 3];
        for k in 0..3 {
            let diff = s.pre[k] - mean[k];
            grad_mean[k] = dlogp * diff / (std[k] * std[k]);
            grad_log_std[k] += dlogp * (diff * diff / (std[k] * std[k]) - 1.0);
        }
        policy.net.backward(&cache, &grad_mean, &mut grad);
    }
    let entropy: f64 = policy.log_std.iter().map(|l| l + 0.5 + HALF_LN_2PI).sum();
    loss -= entropy_coef * entropy;
    for g in &mut grad_log_std {
        *g -= entropy_coef;
    }
    (loss, grad, grad_log_std)
}

fn value_loss(value: &Mlp, obs: &[[f64; 6]], targets: &[f64], idx: &[usize], grad: &mut [f64]) -> f64 {
    let mut cache = ForwardCache::default();
    let inv_n = 1.0 / idx.len().max(1) as f64;
    let mut loss = 0.0;
    for &i in idx {
        value.forward_cached(&obs[i], &mut cache);
        let err = cache.output()[0] - targets[i];
        loss += 0.5 * err * err * inv_n;
        value.backward(&cache, &[err * inv_n], grad);
    }
    loss
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

fn clip_global_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

struct Rollout {
    obs: Vec<[f64; 6]>,
    pre: Vec<Vec3>,
    logp: Vec<f64>,
    reward: Vec<f64>,
    value: Vec<f64>,
    /// Episode ended after this step.
    ended: Vec<bool>,
    /// Value used in place of `V(s_{t+1})` when the episode ended here
    /// (0 on a true terminal, `V(s_{t+1})` on a timeout).
    end_value: Vec<f64>,
}

struct EnvCursor {
    state: RelativeState,
    goal: Vec3,
    elapsed: f64,
    ep_return: f64,
}

impl EnvCursor {
    fn reset(rng: &mut ChaCha8Rng, cfg: &EpisodeConfig) -> Self {
        let (state, goal) = sample_episode(rng, cfg);
        Self { state, goal, elapsed: 0.0, ep_return: 0.0 }
    }
}

/// Trains a fresh policy.
pub fn train(
    env_cfg: &EpisodeConfig,
    cfg: &TrainerConfig,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
) -> Result<TrainOutcome> {
    train_from(None, env_cfg, cfg, orbit, veh, |_| {})
}

/// Trains starting from `initial` (or a fresh policy), calling `progress`
/// after every iteration.
pub fn train_from(
    initial: Option<MlpPolicy>,
    env_cfg: &EpisodeConfig,
    cfg: &TrainerConfig,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
    mut progress: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    env_cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut policy = match initial {
        Some(p) => p,
        None => MlpPolicy::random(&cfg.hidden, cfg.init_log_std, &mut rng),
    };
    let mut value_dims = vec![6];
    value_dims.extend(policy.net.dims()[1..policy.net.layers.len()].iter().copied());
    value_dims.push(1);
    let mut value = Mlp::random(&value_dims, 1.0, &mut rng);

    let n_policy = policy.net.param_count() + 3;
    let mut policy_opt = Adam::new(n_policy, cfg.learning_rate);
    let mut value_opt = Adam::new(value.param_count(), cfg.learning_rate);
    let mut curve = Vec::new();
    let mut steps = 0;
    let mut cursor = EnvCursor::reset(&mut rng, env_cfg);
    let mut iteration = 0;

    while steps < cfg.total_steps {
        let n = cfg.batch_size.min(cfg.total_steps - steps);
        let mut ro = Rollout {
            obs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            logp: Vec::with_capacity(n),
            reward: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            ended: Vec::with_capacity(n),
            end_value: Vec::with_capacity(n),
        };
        let mut returns = Vec::new();
        let mut successes = 0;

        for _ in 0..n {
            let obs = observe(&cursor.state, &cursor.goal).to_array();
            let (pre, action) = policy.sample(&obs, &mut rng);
            let mean = policy.mean(&obs);
            let task = env_cfg.task(cursor.goal);
            let out = step(&cursor.state, &action, &task, env_cfg, orbit, veh, cursor.elapsed)?;
            ro.obs.push(obs);
            ro.pre.push(pre);
            ro.logp.push(gaussian_log_prob(&pre, &mean, &policy.log_std));
            ro.reward.push(out.reward);
            ro.value.push(value.forward(&obs)[0]);
            cursor.ep_return += out.reward;
            cursor.elapsed += env_cfg.dt;
            cursor.state = out.next_state;
            match out.status {
                StepStatus::Running => {
                    ro.ended.push(false);
                    ro.end_value.push(0.0);
                }
                status => {
                    ro.ended.push(true);
                    ro.end_value.push(if status == StepStatus::Timeout {
                        value.forward(&out.obs.to_array())[0]
                    } else {
                        0.0
                    });
                    returns.push(cursor.ep_return);
                    successes += usize::from(status == StepStatus::Reached);
                    cursor = EnvCursor::reset(&mut rng, env_cfg);
                }
            }
        }
        steps += n;
        let bootstrap = value.forward(&observe(&cursor.state, &cursor.goal).to_array())[0];

        let (advantages, targets) = gae(&ro, bootstrap, cfg.discount, cfg.gae_lambda);
        let adv_mean = advantages.iter().sum::<f64>() / n as f64;
        let adv_sd = (advantages.iter().map(|a| (a - adv_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let samples: Vec<SurrogateSample> = (0..n)
            .map(|i| SurrogateSample {
                obs: ro.obs[i],
                pre: ro.pre[i],
                logp_old: ro.logp[i],
                advantage: (advantages[i] - adv_mean) / (adv_sd + 1e-8),
            })
            .collect();

        let mut indices: Vec<usize> = (0..n).collect();
        let mut policy_loss_acc = 0.0;
        let mut value_loss_acc = 0.0;
        let mut updates = 0;
        for _ in 0..cfg.epochs_per_batch {
            indices.shuffle(&mut rng);
            for chunk in indices.chunks(cfg.minibatch_size) {
                let batch: Vec<SurrogateSample> = chunk.iter().map(|&i| samples[i]).collect();
                let (ploss, mut grad, grad_ls) = surrogate_loss(&policy, &batch, cfg.clip_ratio, cfg.entropy_coef);
                grad.extend_from_slice(&grad_ls);
                clip_global_norm(&mut grad, cfg.max_grad_norm);
                let mut params = policy.net.params();
                params.extend_from_slice(&policy.log_std);
                policy_opt.step(&mut params, &grad);
                let np = policy.net.param_count();
                policy.net.set_params(&params[..np]);
                for k in 0..3 {
                    policy.log_std[k] = params[np + k].clamp(LOG_STD_MIN, LOG_STD_MAX);
                }

                let mut vgrad = vec![0.0; value.param_count()];
                let vloss = value_loss(&value, &ro.obs, &targets, chunk, &mut vgrad);
                clip_global_norm(&mut vgrad, cfg.max_grad_norm);
                let mut vparams = value.params();
                value_opt.step(&mut vparams, &vgrad);
                value.set_params(&vparams);

                policy_loss_acc += ploss;
                value_loss_acc += vloss;
                updates += 1;
            }
        }

        let point = CurvePoint {
            iteration,
            env_steps: steps,
            episodes: returns.len(),
            mean_return: if returns.is_empty() { f64::NAN } else { returns.iter().sum::<f64>() / returns.len() as f64 },
            success_rate: if returns.is_empty() { f64::NAN } else { successes as f64 / returns.len() as f64 },
            policy_loss: policy_loss_acc / updates as f64,
            value_loss: value_loss_acc / updates as f64,
            mean_std: policy.log_std.iter().map(|l| l.exp()).sum::<f64>() / 3.0,
        };
        if !(point.policy_loss.is_finite()
            && point.value_loss.is_finite()
            && policy.net.all_finite()
            && value.all_finite())
        {
            return Err(Error::Diverged {
                iteration,
                detail: format!("policy loss {}, value loss {}", point.policy_loss, point.value_loss),
            });
        }
        progress(&point);
        curve.push(point);
        iteration += 1;
    }
    Ok(TrainOutcome { policy, curve })
}

/// Advantages and value targets via GAE(λ).
fn gae(ro: &Rollout, bootstrap: f64, discount: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ro.reward.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if ro.ended[t] {
            ro.end_value[t]
        } else if t + 1 < n {
            ro.value[t + 1]
        } else {
            bootstrap
        };
        let delta = ro.reward[t] + discount * next_value - ro.value[t];
        let carry = if ro.ended[t] { 0.0 } else { next_adv };
        adv[t] = delta + discount * lambda * carry;
        next_adv = adv[t];
    }
    let targets = adv.iter().zip(&ro.value).map(|(a, v)| a + v).collect();
    (adv, targets)
}

pub fn write_learning_curve(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "iteration",
        "env_steps",
        "episodes",
        "mean_return",
        "success_rate",
        "policy_loss",
        "value_loss",
        "mean_std",
    ])?;
    for p in curve {
        w.write_record(&[
            p.iteration.to_string(),
            p.env_steps.to_string(),
            p.episodes.to_string(),
            p.mean_return.to_string(),
            p.success_rate.to_string(),
            p.policy_loss.to_string(),
            p.value_loss.to_string(),
            p.mean_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
