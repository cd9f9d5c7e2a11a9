//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion's PASS/FAIL line is always printed; exits nonzero on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use proxops::cbf::{self, AgentSnapshot, PeerId, RtaParams};
use proxops::dynamics::{
    cwh_closed_form, eci_to_hill, hill_to_eci, propagate_cwh, propagate_nonlinear_pair, ChiefOrbit, RelativeState,
    VehicleParams,
};
use proxops::env::{reward, run_episode, sample_episode, EpisodeConfig, RewardParams, StepStatus};
use proxops::harness::{
    compute_metrics, ideal_distance, min_separation, run, single_agent_passes, three_agent_standoff, LegOutcome,
    MetricsReport, TrajectoryLog,
};
use proxops::policy::{train_from, write_learning_curve, Controller, MlpPolicy, TrainerConfig};
use proxops::qp::{self, QpProblem, QpStatus};
use proxops::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

fn state_vec(s: &RelativeState) -> [f64; 6] {
    [s.pos.x, s.pos.y, s.pos.z, s.vel.x, s.vel.y, s.vel.z]
}

fn rel_err(a: &RelativeState, b: &RelativeState) -> f64 {
    let (a, b) = (state_vec(a), state_vec(b));
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

// 1. Unforced RK4 propagation vs the analytic CWH solution.
fn dynamics_oracle() -> Outcome {
    let start = Instant::now();
    let orbit = ChiefOrbit::default();
    let veh = VehicleParams::default();
    let cfg = EpisodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pos = Vec3::from_fn(|k, _| rng.random_range(-cfg.bounds[k]..cfg.bounds[k]));
        let s0 = RelativeState::new(pos, rand_vec(&mut rng, 5.0));
        let mut s = s0;
        for tick in 1..=500 {
            s = propagate_cwh(&s, &Vec3::zeros(), 1.0, 10, &orbit, &veh).map_err(|e| e.to_string())?;
            let exact = cwh_closed_form(&s0, tick as f64, orbit.mean_motion);
            worst = worst.max(rel_err(&s, &exact));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 5.0, format!("max relative error {worst:.2e}, {secs:.2} s"))
}

// 2. Nonlinear two-body deputy vs the CWH prediction over a 500 s coast.
fn linearisation() -> Outcome {
    let orbit = ChiefOrbit::default();
    let veh = VehicleParams::default();
    let n = orbit.mean_motion;
    let offsets = [
        Vec3::new(200.0, 0.0, 0.0),
        Vec3::new(-200.0, 0.0, 0.0),
        Vec3::new(0.0, 200.0, 0.0),
        Vec3::new(0.0, 0.0, 200.0),
        Vec3::new(1.0, -1.0, 1.0).normalize() * 200.0,
    ];
    let mut worst = 0.0f64;
    for dr in offsets {
        // Start on the CWH-consistent velocity of a closed relative orbit where
        // possible (dy/dt = −2 n x), and at rest otherwise.
        let rel0 = RelativeState::new(dr, Vec3::new(0.0, -2.0 * n * dr.x, 0.0));
        let mut chief = orbit.chief_initial_state();
        let mut deputy = hill_to_eci(&chief, &rel0).map_err(|e| e.to_string())?;
        let mut lin = rel0;
        for _ in 0..500 {
            let (c, d) = propagate_nonlinear_pair(&chief, &deputy, &Vec3::zeros(), &veh, 1.0, 10, &orbit)
                .map_err(|e| e.to_string())?;
            chief = c;
            deputy = d;
            lin = propagate_cwh(&lin, &Vec3::zeros(), 1.0, 10, &orbit, &veh).map_err(|e| e.to_string())?;
            let nl = eci_to_hill(&chief, &deputy).map_err(|e| e.to_string())?;
            worst = worst.max((nl.pos - lin.pos).norm() / 200.0);
        }
    }
    check(worst < 0.01, format!("max deviation {:.4}% of separation", 100.0 * worst))
}

fn grid_search(qp: &QpProblem, center: [f64; 3], half: f64, step: f64) -> (f64, [f64; 3]) {
    let m = (half / step).round() as i64;
    (-m..=m)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, center);
            for j in -m..=m {
                for k in -m..=m {
                    let x = [center[0] + i as f64 * step, center[1] + j as f64 * step, center[2] + k as f64 * step];
                    if qp.max_violation(&x) <= 0.0 {
                        let f = qp.objective(&x);
                        if f < best.0 {
                            best = (f, x);
                        }
                    }
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, center), |a, b| if b.0 < a.0 { b } else { a })
}

fn random_feasible_qp(rng: &mut ChaCha8Rng, dim: usize, rows: usize, spread: f64) -> QpProblem {
    let w = (0..dim).map(|_| rng.random_range(0.2..5.0)).collect();
    let c = (0..dim).map(|_| rng.random_range(-spread..spread)).collect();
    let mut qp = QpProblem::new(w, c);
    let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(-spread..spread) * 0.5).collect();
    for _ in 0..rows {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = a.iter().zip(&x0).map(|(p, q)| p * q).sum::<f64>() + rng.random_range(0.0..spread * 0.2);
        qp.push_row(a, b);
    }
    qp
}

// 3. QP solver: KKT on random instances, analytic box projections, grid oracle.
fn qp_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut solver_time = 0.0;
    let mut timed = |qp: &QpProblem| {
        let t = Instant::now();
        let sol = qp::solve(qp, qp::DEFAULT_TOL, qp::DEFAULT_MAX_ITER);
        solver_time += t.elapsed().as_secs_f64();
        sol
    };

    let mut worst_kkt = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.random_range(2..=10);
        let rows = rng.random_range(1..=15);
        let qp = random_feasible_qp(&mut rng, dim, rows, 5.0);
        let sol = timed(&qp);
        if sol.status != QpStatus::Optimal {
            return Err(format!("random instance returned {:?}", sol.status));
        }
        worst_kkt = worst_kkt.max(sol.kkt_residual);
    }

    let mut worst_box = 0.0f64;
    for _ in 0..200 {
        let dim = rng.random_range(1..=9);
        let w = (0..dim).map(|_| rng.random_range(0.1..1e6)).collect();
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lo: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..0.0)).collect();
        let hi: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0)).collect();
        let mut qp = QpProblem::new(w, c.clone());
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            qp.push_row(e.clone(), hi[k]);
            e[k] = -1.0;
            qp.push_row(e, -lo[k]);
        }
        let sol = timed(&qp);
        for k in 0..dim {
            worst_box = worst_box.max((sol.x[k] - c[k].clamp(lo[k], hi[k])).abs());
        }
    }

    let mut worst_grid = 0.0f64;
    let mut above_coarse = 0.0f64;
    for _ in 0..4 {
        let mut qp = random_feasible_qp(&mut rng, 3, 4, 0.15);
        // Make sure the unconstrained minimum is cut off.
        let c = qp.cost_center.clone();
        let a = vec![c[0].signum(), c[1].signum(), c[2].signum()];
        let b = 0.5 * a.iter().zip(&c).map(|(p, q)| p * q).sum::<f64>();
        qp.push_row(a, b);
        let sol = timed(&qp);
        let f_sol = qp.objective(&sol.x);
        let (f_coarse, x1) = grid_search(&qp, [0.0; 3], 0.2, 1e-3);
        let (_, x2) = grid_search(&qp, x1, 5e-3, 5e-5);
        let (_, x3) = grid_search(&qp, x2, 1e-4, 1e-6);
        let (f_fine, _) = grid_search(&qp, x3, 2e-6, 2e-8);
        worst_grid = worst_grid.max((f_sol - f_fine).abs());
        above_coarse = above_coarse.max(f_sol - f_coarse);
        if qp.max_violation(&sol.x) > 1e-9 {
            return Err("grid instance solution infeasible".into());
        }
    }

    check(
        worst_kkt < 1e-6 && worst_box < 1e-9 && worst_grid < 1e-5 && above_coarse <= 1e-12 && solver_time < 10.0,
        format!(
            "max KKT {worst_kkt:.1e}, box error {worst_box:.1e}, grid gap {worst_grid:.1e}, solver time {solver_time:.2} s"
        ),
    )
}

// 4. Reward values with the default coefficients.
fn reward_suite() -> Outcome {
    let p = RewardParams::default();
    let g = Vec3::new(10.0, -20.0, 5.0);
    let r1 = reward(&g, &g, &Vec3::zeros(), &g, &p);
    let r2 =
        reward(&Vec3::new(100.0, 0.0, 0.0), &Vec3::new(101.0, 0.0, 0.0), &Vec3::new(0.1, 0.0, 0.0), &Vec3::zeros(), &p);
    let one = Vec3::new(1.0, 0.0, 0.0);
    let r3 = reward(&one, &one, &Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), &p);
    let errs = [(r1 - 1e-3).abs(), (r2 - (1e-3 / 101.0 + 1e-2)).abs(), (r3 + 1.95e-2).abs()];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    check(
        worst <= 1e-12 && (r2 - 1.0009901e-2).abs() < 1e-9,
        format!("rewards {r1:.6e}, {r2:.7e}, {r3:.4e}; max error {worst:.1e}"),
    )
}

fn no_timeouts(log: &TrajectoryLog) -> bool {
    !log.timed_out && log.events.iter().all(|e| e.outcome == LegOutcome::Reached)
}

// 5. Single agent, baseline controller.
fn experiment1() -> Outcome {
    let start = Instant::now();
    let spec = single_agent_passes();
    let log = run(&spec).map_err(|e| e.to_string())?;
    let m = compute_metrics(&log);
    let secs = start.elapsed().as_secs_f64();
    let limit = 1.25 * ideal_distance(&spec);
    let a = m.aggregate;
    check(
        a.targets_reached == 4 && no_timeouts(&log) && a.distance_traveled <= limit && secs < 30.0,
        format!(
            "{}/4 targets, distance {:.1} m (limit {limit:.0}), time {:.0} s, {secs:.2} s wall",
            a.targets_reached, a.distance_traveled, a.time_taken
        ),
    )
}

// 6. Standoff without the filter: no interaction, designed conflict.
fn experiment2() -> Result<(String, MetricsReport), String> {
    let spec = three_agent_standoff(false);
    let log = run(&spec).map_err(|e| e.to_string())?;
    let m = compute_metrics(&log);
    let mut worst = 0.0f64;
    for i in 0..spec.agents.len() {
        let solo = run(&spec.solo(i)).map_err(|e| e.to_string())?;
        for (a, b) in log.agent_records(i).zip(solo.agent_records(0)) {
            if a.t != b.t {
                return Err("tick times differ from solo run".into());
            }
            let (x, y) = (state_vec(&a.state), state_vec(&b.state));
            worst = worst.max(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
        }
    }
    let closest = min_separation(&log);
    let detail = format!(
        "{}/8 targets, solo deviation {worst:.1e}, closest approach {closest:.1} m",
        m.aggregate.targets_reached
    );
    if m.aggregate.targets_reached == 8 && no_timeouts(&log) && worst <= 1e-9 && closest < 50.0 {
        Ok((detail, m))
    } else {
        Err(detail)
    }
}

// 7. Standoff with the filter.
fn experiment3(exp2: Option<&MetricsReport>) -> Outcome {
    let start = Instant::now();
    let spec = three_agent_standoff(true);
    let log = run(&spec).map_err(|e| e.to_string())?;
    let m = compute_metrics(&log);
    let secs = start.elapsed().as_secs_f64();
    let closest = min_separation(&log);
    let max_speed = log.records.iter().filter(|r| r.t >= 30.0).map(|r| r.state.vel.norm()).fold(0.0, f64::max);
    let a = m.aggregate;
    let (more_time, more_dv, reference) = match exp2 {
        Some(e2) => (
            a.time_taken > e2.aggregate.time_taken,
            a.delta_v > e2.aggregate.delta_v,
            format!(
                "time {:.0} vs {:.0} s, delta-v {:.1} vs {:.1} m/s",
                a.time_taken, e2.aggregate.time_taken, a.delta_v, e2.aggregate.delta_v
            ),
        ),
        None => (false, false, "no unfiltered reference".into()),
    };
    check(
        a.targets_reached == 8 && no_timeouts(&log) && closest >= 45.0 && max_speed <= 3.3 && more_time && more_dv
            && secs < 120.0,
        format!(
            "{}/8 targets, closest {closest:.1} m, max speed after 30 s {max_speed:.3} m/s, {reference}, {secs:.2} s wall",
            a.targets_reached
        ),
    )
}

// 8. The filter leaves strictly safe commands untouched.
fn minimal_intervention() -> Outcome {
    let orbit = ChiefOrbit::default();
    let params = RtaParams::default();
    let veh = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut accepted = 0;
    let mut worst = 0.0f64;
    while accepted < 1000 {
        let snap = |rng: &mut ChaCha8Rng| {
            AgentSnapshot::new(RelativeState::new(rand_vec(rng, 600.0), rand_vec(rng, 1.7)), rand_vec(rng, 0.5), veh)
        };
        let agent = snap(&mut rng);
        let mut peers: Vec<(PeerId, AgentSnapshot)> = vec![(PeerId::Obstacle(0), AgentSnapshot::chief())];
        for j in 0..rng.random_range(0..3) {
            peers.push((PeerId::Agent(j), snap(&mut rng)));
        }
        let desired = rand_vec(&mut rng, 0.95);
        let rows = cbf::build_rows(&agent, &peers, &orbit, &params);
        if rows.iter().any(|r| r.value(&desired) < 1e-3) {
            continue;
        }
        accepted += 1;
        let d = cbf::filter_agent(&agent, &peers, &desired, &orbit, &params);
        worst = worst.max((d.u_safe - desired).amax());
    }
    check(worst <= 1e-6, format!("1000 safe snapshots, max change {worst:.1e}"))
}

fn success_rate(policy: &MlpPolicy, trials: usize, seed: u64) -> Result<f64, String> {
    let cfg = EpisodeConfig::default();
    let (orbit, veh) = (ChiefOrbit::default(), VehicleParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..trials {
        let (s, g) = sample_episode(&mut rng, &cfg);
        let r = run_episode(&s, &g, &cfg, &orbit, &veh, |o| policy.act(o)).map_err(|e| e.to_string())?;
        ok += usize::from(r.status == StepStatus::Reached);
    }
    Ok(ok as f64 / trials as f64)
}

// 9. Training reaches a usable policy within one million environment steps.
fn trainer(dir: &Path) -> Outcome {
    const BUDGET: usize = 1_000_000;
    const CHUNK: usize = 32 * 4096;
    let env_cfg = EpisodeConfig::default();
    let (orbit, veh) = (ChiefOrbit::default(), VehicleParams::default());
    let mut policy = None;
    let mut used = 0;
    let mut curve = Vec::new();
    let mut rate = 0.0;
    while used < BUDGET {
        let steps = CHUNK.min(BUDGET - used);
        let cfg = TrainerConfig { total_steps: steps, seed: used as u64, ..TrainerConfig::default() };
        let out = train_from(policy.take(), &env_cfg, &cfg, &orbit, &veh, |_| {}).map_err(|e| e.to_string())?;
        curve.extend(out.curve);
        used += steps;
        rate = success_rate(&out.policy, 50, 9_000)?;
        policy = Some(out.policy);
        if rate >= 0.9 {
            break;
        }
    }
    let curve_path = dir.join("learning_curve.csv");
    write_learning_curve(&curve, &curve_path).map_err(|e| e.to_string())?;
    check(rate >= 0.9 && curve_path.exists(), format!("{:.0}% deterministic success after {used} steps", 100.0 * rate))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_proxops")).args(args).output().map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

// 10. Repeated CLI invocations produce identical artifacts.
fn determinism(dir: &Path) -> Outcome {
    let mut compared = 0;
    for (name, extra) in [("single", vec!["--rta", "off"]), ("standoff", vec!["--rta", "on"])] {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.join(format!("{name}-{rep}"));
            let mut args = vec!["run", "--scenario", name, "--seed", "7", "--out", out.to_str().unwrap()];
            args.extend(&extra);
            cli(&args)?;
            outputs.push(std::fs::read(out.join("trajectory.csv")).map_err(|e| e.to_string())?);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{name} trajectories differ"));
        }
        compared += 1;
    }
    let mut policies = Vec::new();
    for rep in 0..2 {
        let out = dir.join(format!("train-{rep}"));
        cli(&["train", "--steps", "4096", "--seed", "7", "--quiet", "--out", out.to_str().unwrap()])?;
        policies.push(std::fs::read(out.join("policy.json")).map_err(|e| e.to_string())?);
    }
    check(policies[0] == policies[1], format!("{compared} trajectory CSV pairs and a policy pair byte-identical"))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 dynamics oracle", dynamics_oracle()),
        ("2 linearisation", linearisation()),
        ("3 qp solver", qp_solver()),
        ("4 reward values", reward_suite()),
        ("5 single agent", experiment1()),
    ];
    let exp2 = experiment2();
    let exp2_metrics = exp2.as_ref().ok().map(|(_, m)| m.clone());
    results.push(("6 standoff, filter off", exp2.map(|(d, _)| d)));
    results.push(("7 standoff, filter on", experiment3(exp2_metrics.as_ref())));
    results.push(("8 minimal intervention", minimal_intervention()));
    results.push(("9 trainer", trainer(dir.path())));
    results.push(("10 cli determinism", determinism(dir.path())));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
