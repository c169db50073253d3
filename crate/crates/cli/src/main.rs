use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use snakelab::config::ExperimentConfig;
use snakelab::dynamics::{trajectory_header, trajectory_row, RobotState};
use snakelab::fpf::{circular_mean, gain_row, particle_rows, GAIN_LOG_HEADER, PARTICLE_SNAPSHOT_HEADER};
use snakelab::harness::{
    metrics_csv, run_evaluation, run_learning_observed, run_open_loop, sensor_checkpoint, sensor_from_checkpoint,
    LearningOutcome, StepView,
};
use snakelab::phase::find_limit_cycle;
use snakelab::qlearn::QWeights;
use snakelab::sensor::{observation_rows, weight_trace_header, weight_trace_rows, OBSERVATION_LOG_HEADER};
use snakelab::Error;

#[derive(Parser)]
#[command(name = "snakelab", version, about = "Snake robot gait learning with oscillator phase filters")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of learning episodes, overrides the config.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Number of drive periods to simulate or evaluate.
    #[arg(long, global = true)]
    periods: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop gait; writes trajectory.csv.
    Simulate,
    /// Extracts the limit cycle; writes limit_cycle_j<k>.csv per joint.
    LimitCycle,
    /// Runs the learning loop; writes metrics, weights and filter logs.
    Learn,
    /// Rolls out a learned policy from a weight checkpoint.
    Evaluate {
        /// Checkpoint written by `learn` (default: <out>/weights.csv).
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Learns, evaluates and writes the data behind every figure.
    ExportFigs,
    /// Prints the default config.
    DefaultConfig,
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e.root(), Error::Config(_) | Error::InvalidParams(_) | Error::Parse(_)) {
            Failure::Config(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds.master = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(e) = cli.episodes {
        cfg.learning.episodes = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome {
    if let Command::DefaultConfig = cli.command {
        print!("{}", ExperimentConfig::default().to_toml());
        return Ok(());
    }
    let cfg = load_config(&cli)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Simulate => simulate(&cfg, cli.periods.unwrap_or(20), &out),
        Command::LimitCycle => limit_cycle(&cfg, &out),
        Command::Learn => learn(&cfg, &out).map(|_| ()),
        Command::Evaluate { weights } => {
            let path = weights.clone().unwrap_or_else(|| out.join("weights.csv"));
            evaluate(&cfg, &path, cli.periods.unwrap_or(cfg.evaluation.periods), &out)
        }
        Command::ExportFigs => export_figs(&cfg, cli.periods.unwrap_or(cfg.evaluation.periods), &out),
        Command::DefaultConfig => unreachable!(),
    }
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn trajectory_csv(states: &[RobotState]) -> String {
    let mut s = trajectory_header(states[0].n());
    s.push('\n');
    for st in states {
        s.push_str(&trajectory_row(st));
        s.push('\n');
    }
    s
}

fn simulate(cfg: &ExperimentConfig, periods: usize, out: &Path) -> Outcome {
    let run = run_open_loop(cfg, periods)?;
    let d = run.displacement();
    info!(
        "open loop, {periods} periods: displacement ({:.4}, {:.4}) m, net dpsi {:.5} rad",
        d.x,
        d.y,
        run.net_dpsi()
    );
    write(&out.join("trajectory.csv"), &trajectory_csv(&run.trajectory))
}

fn limit_cycle(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let atlas = find_limit_cycle(&cfg.robot, cfg.atlas.settle_periods, cfg.atlas.samples)?;
    info!("closure residual {:.3e}, period {:.6} s", atlas.residual, atlas.period);
    for j in 0..atlas.joints() {
        write(&out.join(format!("limit_cycle_j{}.csv", j + 1)), &atlas.to_joint_csv(j))?;
    }
    Ok(())
}

/// Filter logs recorded during the final episode.
struct FinalEpisodeLogs {
    observations: String,
    gains: String,
    tracking: String,
}

fn learn(cfg: &ExperimentConfig, out: &Path) -> std::result::Result<LearningOutcome, Failure> {
    let last = cfg.learning.episodes;
    let mut logs = FinalEpisodeLogs {
        observations: format!("{OBSERVATION_LOG_HEADER}\n"),
        gains: format!("{GAIN_LOG_HEADER}\n"),
        tracking: String::from("t,j,x,h_hat,theta_mean\n"),
    };
    let mut last_particles = String::new();
    let outcome = run_learning_observed(cfg, &mut |v: &StepView| {
        if v.episode != last {
            return;
        }
        let t = v.record.t;
        logs.observations.push_str(&observation_rows(t, &v.record.dz));
        let x = v.before.shape();
        for (j, ju) in v.record.joints.iter().enumerate() {
            logs.gains.push_str(&gain_row(t, j + 1, &ju.gain));
            let (_, mean) = circular_mean(&v.bank.ensembles[j].theta);
            writeln!(logs.tracking, "{t},{},{},{},{mean}", j + 1, x[j], ju.h_hat).unwrap();
        }
        if v.step + 1 == cfg.steps_per_episode() {
            last_particles.clear();
            for (j, ens) in v.bank.ensembles.iter().enumerate() {
                last_particles.push_str(&particle_rows(v.after.t, j + 1, ens));
            }
        }
    })?;

    write(&out.join("metrics.csv"), &metrics_csv(&outcome.episodes))?;
    let mut ckpt = outcome.weights.to_checkpoint();
    ckpt.push_str(&sensor_checkpoint(&outcome.sensor));
    write(&out.join("weights.csv"), &ckpt)?;

    let mut trace = weight_trace_header(cfg.sensor.m_h());
    trace.push('\n');
    let duration = cfg.learning.periods_per_episode as f64 * cfg.robot.period();
    for log in &outcome.episodes {
        trace.push_str(&weight_trace_rows(log.episode as f64 * duration, &log.sensor_snapshot));
    }
    write(&out.join("sensor_weights.csv"), &trace)?;
    write(&out.join("observations.csv"), &logs.observations)?;
    write(&out.join("gains.csv"), &logs.gains)?;
    write(&out.join("tracking.csv"), &logs.tracking)?;
    write(&out.join("particles.csv"), &format!("{PARTICLE_SNAPSHOT_HEADER}\n{last_particles}"))?;
    write(&out.join("config.toml"), &cfg.to_toml())?;
    if let Some(log) = outcome.episodes.last() {
        info!(
            "final episode: h rmse {:?}, phase rmse {:?}",
            log.h_rmse.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            log.phase_rmse.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(outcome)
}

fn evaluation_outputs(
    cfg: &ExperimentConfig,
    w: &QWeights,
    sensor: &snakelab::sensor::SensorWeights,
    periods: usize,
    out: &Path,
) -> Outcome {
    let run = run_evaluation(cfg, w, sensor, periods)?;
    if run.clamp_events > 0 {
        warn!("policy output clamped on {} steps", run.clamp_events);
    }
    let start = &run.trajectory[run.warmup_steps];
    let end = run.trajectory.last().unwrap();
    let d = end.r_cm - start.r_cm;
    info!(
        "closed loop, {periods} periods: net dpsi {:.4} rad, displacement ({:.3}, {:.3}) m, mean |u| {:.4}",
        run.net_dpsi(),
        d.x,
        d.y,
        run.mean_control_norm()
    );
    write(&out.join("evaluation.csv"), &trajectory_csv(&run.trajectory[run.warmup_steps..]))?;
    let mut controls = String::from("t");
    for j in 1..=cfg.robot.n {
        write!(controls, ",u{j}").unwrap();
    }
    controls.push('\n');
    for (st, u) in run.trajectory.iter().zip(&run.controls).skip(run.warmup_steps) {
        write!(controls, "{}", st.t).unwrap();
        for v in u.u.iter() {
            write!(controls, ",{v}").unwrap();
        }
        controls.push('\n');
    }
    write(&out.join("controls.csv"), &controls)?;
    let summary = format!(
        "periods,net_dpsi,dx,dy,mean_u_norm,clamp_events\n{periods},{},{},{},{},{}\n",
        run.net_dpsi(),
        d.x,
        d.y,
        run.mean_control_norm(),
        run.clamp_events
    );
    write(&out.join("evaluation_summary.csv"), &summary)
}

fn evaluate(cfg: &ExperimentConfig, weights: &Path, periods: usize, out: &Path) -> Outcome {
    let text = fs::read_to_string(weights).map_err(|e| Failure::Config(format!("{}: {e}", weights.display())))?;
    let w = QWeights::from_checkpoint(&text, &cfg.feature_config())?;
    let sensor = sensor_from_checkpoint(&text, cfg.robot.n - 1, cfg.sensor.m_h())?;
    evaluation_outputs(cfg, &w, &sensor, periods, out)
}

fn export_figs(cfg: &ExperimentConfig, periods: usize, out: &Path) -> Outcome {
    limit_cycle(cfg, out)?;
    let outcome = learn(cfg, out)?;
    evaluation_outputs(cfg, &outcome.weights, &outcome.sensor, periods, out)?;
    let open = run_open_loop(cfg, periods)?;
    write(&out.join("open_loop.csv"), &trajectory_csv(&open.trajectory))?;
    info!("figure data written to {}", out.display());
    Ok(())
}
