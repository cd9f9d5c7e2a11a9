//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::{ChiefOrbit, VehicleParams};
use crate::env::{EpisodeConfig, SCENARIO_ACCEPTANCE};
use crate::harness::{self, ControllerChoice, DynamicsModel, ScenarioSpec};
use crate::policy::{load_policy, save_policy, train_from, write_learning_curve, TrainerConfig};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "proxops", version, about = "Spacecraft proximity-operations simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write trajectory, metrics and plot data.
    Run(RunArgs),
    /// Train a waypoint policy.
    Train(TrainArgs),
    /// Success rate and path statistics over randomly sampled waypoint tasks.
    BaselineStats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DynamicsArg {
    Cwh,
    Nonlinear,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in scenario: `single` or `standoff`.
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,
    /// Scenario JSON file (as written to effective_config.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub rta: Option<Toggle>,
    /// `baseline` or `policy:<path>`.
    #[arg(long)]
    pub controller: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub control_dt: Option<f64>,
    #[arg(long)]
    pub sim_dt: Option<f64>,
    #[arg(long, value_enum)]
    pub dynamics: Option<DynamicsArg>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Trainer configuration JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue training from an existing policy file.
    #[arg(long)]
    pub init_policy: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Suppress per-iteration progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// `baseline` or `policy:<path>`.
    #[arg(long, default_value = "baseline")]
    pub controller: String,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Also write stats.json into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self { code: 2, message: e.to_string() }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn parse_controller(text: &str) -> crate::Result<ControllerChoice> {
    if text == "baseline" {
        return Ok(ControllerChoice::default());
    }
    match text.strip_prefix("policy:") {
        Some(path) if !path.is_empty() => Ok(ControllerChoice::Policy { path: path.into() }),
        _ => Err(Error::Config(format!("controller must be `baseline` or `policy:<path>`, got `{text}`"))),
    }
}

/// Builds the effective scenario from a built-in name or config file plus
/// flag overrides.
pub fn resolve_scenario(args: &RunArgs) -> crate::Result<ScenarioSpec> {
    let rta = args.rta.map(|t| t == Toggle::On);
    let mut spec = match (&args.scenario, &args.config) {
        (_, Some(path)) => serde_json::from_str::<ScenarioSpec>(&fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        (Some(name), None) => harness::builtin(name, rta.unwrap_or(false))?,
        (None, None) => return Err(Error::Config("one of --scenario or --config is required".into())),
    };
    if let Some(r) = rta {
        spec.rta_enabled = r;
    }
    if let Some(c) = &args.controller {
        spec = spec.with_controller(parse_controller(c)?);
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(dt) = args.control_dt {
        spec.control_dt = dt;
    }
    if let Some(dt) = args.sim_dt {
        spec.sim_dt = dt;
    }
    if let Some(d) = args.dynamics {
        spec.dynamics = match d {
            DynamicsArg::Cwh => DynamicsModel::Cwh,
            DynamicsArg::Nonlinear => DynamicsModel::Nonlinear,
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    fs::write(path, text + "\n").map_err(CliError::runtime)
}

pub fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let spec = resolve_scenario(args).map_err(CliError::usage)?;
    let controllers = spec
        .agents
        .iter()
        .map(|a| harness::load_controller(&a.controller))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(CliError::usage)?;
    let log = harness::run_with(&spec, &controllers).map_err(CliError::runtime)?;
    let metrics = harness::compute_metrics(&log);

    fs::create_dir_all(&args.out).map_err(CliError::runtime)?;
    write_json(&args.out.join("effective_config.json"), &spec)?;
    let csv = fs::File::create(args.out.join("trajectory.csv")).map_err(CliError::runtime)?;
    harness::write_trajectory_csv(&log, std::io::BufWriter::new(csv)).map_err(CliError::runtime)?;
    write_json(&args.out.join("metrics.json"), &metrics)?;
    fs::write(args.out.join("plot_data.json"), harness::plot_data_json(&log)).map_err(CliError::runtime)?;

    let a = &metrics.aggregate;
    println!(
        "{}: targets {}/{}, time {:.1} s, distance {:.1} m, delta-v {:.2} m/s, min separation {:.1} m",
        spec.name,
        a.targets_reached,
        a.targets_assigned,
        a.time_taken,
        a.distance_traveled,
        a.delta_v,
        harness::min_separation(&log)
    );
    if let Some(reason) = &log.aborted {
        return Err(CliError::runtime(format!("run aborted: {reason}")));
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::usage)?;
            serde_json::from_str::<TrainerConfig>(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => TrainerConfig::default(),
    };
    if let Some(s) = args.steps {
        cfg.total_steps = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::usage)?;
    let initial = match &args.init_policy {
        Some(p) => Some(load_policy(p).map_err(CliError::usage)?),
        None => None,
    };
    let env_cfg = EpisodeConfig::default();
    let quiet = args.quiet;
    let out = train_from(initial, &env_cfg, &cfg, &ChiefOrbit::default(), &VehicleParams::default(), |p| {
        if !quiet {
            eprintln!(
                "iter {:4}  steps {:8}  return {:8.4}  success {:5.1}%  std {:.3}",
                p.iteration,
                p.env_steps,
                p.mean_return,
                100.0 * p.success_rate,
                p.mean_std
            );
        }
    })
    .map_err(CliError::runtime)?;

    fs::create_dir_all(&args.out).map_err(CliError::runtime)?;
    write_json(&args.out.join("trainer_config.json"), &cfg)?;
    save_policy(&out.policy, &args.out.join("policy.json")).map_err(CliError::runtime)?;
    write_learning_curve(&out.curve, &args.out.join("learning_curve.csv")).map_err(CliError::runtime)?;
    println!("wrote {}", args.out.join("policy.json").display());
    Ok(())
}

pub fn cmd_baseline_stats(args: &StatsArgs) -> CliResult<()> {
    let choice = parse_controller(&args.controller).map_err(CliError::usage)?;
    let controller = harness::load_controller(&choice).map_err(CliError::usage)?;
    let cfg = EpisodeConfig { acceptance_radius: SCENARIO_ACCEPTANCE, ..EpisodeConfig::default() };
    let stats = harness::baseline_stats(
        controller.as_ref(),
        args.trials,
        args.seed,
        &cfg,
        &ChiefOrbit::default(),
        &VehicleParams::default(),
    )
    .map_err(CliError::runtime)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(CliError::runtime)?;
        write_json(&dir.join("stats.json"), &stats)?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats).map_err(CliError::runtime)?);
    } else {
        let pct = 100.0 * (stats.mean_distance / stats.mean_straight_line - 1.0);
        println!("trials            {}", stats.trials);
        println!("success rate      {:.1}%", 100.0 * stats.success_rate);
        println!("time (s)          {:.2} ± {:.2}", stats.mean_time, stats.sd_time);
        println!("distance (m)      {:.2} ± {:.2}", stats.mean_distance, stats.sd_distance);
        println!("straight line (m) {:.2}", stats.mean_straight_line);
        println!("excess (m)        {:.2} ± {:.2} ({pct:.1}%)", stats.mean_excess, stats.sd_excess);
        println!("delta-v (m/s)     {:.2}", stats.mean_delta_v);
    }
    Ok(())
}

/// Parses `args` and dispatches; returns the process exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::BaselineStats(a) => cmd_baseline_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
