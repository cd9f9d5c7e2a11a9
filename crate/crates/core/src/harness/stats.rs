use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ChiefOrbit, VehicleParams};
use crate::env::{run_episode, sample_episode, EpisodeConfig, EpisodeResult, StepStatus};
use crate::policy::Controller;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    // Means over an empty set are NaN (serialised as null).
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// The remaining fields are over successful trials only.
    pub mean_time: f64,
    pub sd_time: f64,
    pub mean_distance: f64,
    pub sd_distance: f64,
    pub mean_straight_line: f64,
    /// Mean of `distance − straight_line`, m.
    pub mean_excess: f64,
    pub sd_excess: f64,
    pub mean_delta_v: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Runs `n_trials` randomly sampled episodes in parallel. Trial `k` draws
/// its start and goal from ChaCha stream `k` under `seed`, so results do not
/// depend on thread scheduling.
pub fn episode_trials(
    controller: &dyn Controller,
    n_trials: usize,
    seed: u64,
    cfg: &EpisodeConfig,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
) -> Result<Vec<EpisodeResult>> {
    cfg.validate()?;
    (0..n_trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (start, goal) = sample_episode(&mut rng, cfg);
            run_episode(&start, &goal, cfg, orbit, veh, |obs| controller.act(obs))
        })
        .collect()
}

pub fn summarise(results: &[EpisodeResult]) -> TrialStats {
    let ok: Vec<&EpisodeResult> = results.iter().filter(|r| r.status == StepStatus::Reached).collect();
    let col = |f: fn(&EpisodeResult) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let (mean_time, sd_time) = mean_sd(&col(|r| r.time));
    let (mean_distance, sd_distance) = mean_sd(&col(|r| r.distance));
    let (mean_straight_line, _) = mean_sd(&col(|r| r.straight_line));
    let (mean_excess, sd_excess) = mean_sd(&col(|r| r.distance - r.straight_line));
    let (mean_delta_v, _) = mean_sd(&col(|r| r.delta_v));
    TrialStats {
        trials: results.len(),
        successes: ok.len(),
        success_rate: if results.is_empty() { 0.0 } else { ok.len() as f64 / results.len() as f64 },
        mean_time,
        sd_time,
        mean_distance,
        sd_distance,
        mean_straight_line,
        mean_excess,
        sd_excess,
        mean_delta_v,
    }
}

/// Success rate and path statistics of `controller` on the training task
/// distribution with the scenario acceptance radius.
pub fn baseline_stats(
    controller: &dyn Controller,
    n_trials: usize,
    seed: u64,
    cfg: &EpisodeConfig,
    orbit: &ChiefOrbit,
    veh: &VehicleParams,
) -> Result<TrialStats> {
    Ok(summarise(&episode_trials(controller, n_trials, seed, cfg, orbit, veh)?))
}
