//! Command-line front end: `train`, `sweep` and `eval` subcommands over the
//! shared experiment configuration. Flags override config-file entries,
//! which override per-task defaults. Exit codes: 0 success, 1 runtime
//! failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use photonrl::envs::Task;
use photonrl::harness::{
    evaluate_fixed, export_sweep_csv, load_weights, read_config_file, save_weights, sweep, train,
    ExperimentConfig, SweepParam, TrainingLog,
};

#[derive(Parser)]
#[command(name = "photonrl", version, about = "Delay-line reservoir Q-learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a readout and write the per-episode log.
    Train(RunArgs),
    /// Train repeatedly while varying one parameter; tabulate the best
    /// 100-episode moving average per run.
    Sweep(SweepArgs),
    /// Run greedy episodes with fixed weights and no learning.
    Eval(EvalArgs),
}

/// Flags shared by every subcommand; each one overrides the matching
/// config-file key.
#[derive(Args)]
struct Overrides {
    /// Optional config file of `key = value` lines (keys match these flags).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task: cartpole | mountaincar.
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pin the input mask to another run's seed (needed to evaluate saved
    /// weights under a fresh seed).
    #[arg(long)]
    mask_seed: Option<u64>,
    /// Low-pass time constant [s].
    #[arg(long)]
    tau_l: Option<f64>,
    /// High-pass time constant [s].
    #[arg(long)]
    tau_h: Option<f64>,
    /// Feedback delay [s].
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Feedback strength kappa.
    #[arg(long)]
    kappa: Option<f64>,
    /// Modulator bias point [rad].
    #[arg(long)]
    phi0: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Virtual node count N.
    #[arg(long)]
    nodes: Option<usize>,
    /// Node interval theta [s].
    #[arg(long)]
    theta: Option<f64>,
    /// Integration steps per node interval (dt = theta / divisor).
    #[arg(long)]
    dt_divisor: Option<u32>,
    /// Node readout: end | mean.
    #[arg(long)]
    node_sampling: Option<String>,
    /// Input scaling mu.
    #[arg(long)]
    mu: Option<f64>,
    /// Input bias b.
    #[arg(long)]
    bias: Option<f64>,
    /// Q-learning step size.
    #[arg(long)]
    alpha: Option<f64>,
    /// Discount rate.
    #[arg(long)]
    gamma: Option<f64>,
    /// Exploration floor.
    #[arg(long)]
    eps0: Option<f64>,
    /// Exploration decay coefficient.
    #[arg(long)]
    k_eps: Option<f64>,
    #[arg(long)]
    replay_capacity: Option<usize>,
    #[arg(long)]
    minibatch: Option<usize>,
    /// Apply minibatch updates as one averaged step instead of sequentially.
    #[arg(long)]
    averaged_updates: bool,
    /// Zero the reservoir at each episode start (true) or run it
    /// continuously across episodes (false).
    #[arg(long)]
    reservoir_reset: Option<bool>,
    /// Bootstrap the TD target through time-limit cuts (true) or store
    /// them as terminal (false).
    #[arg(long)]
    truncation_bootstrap: Option<bool>,
    #[arg(long)]
    cp_position_divisor: Option<f64>,
    #[arg(long)]
    cp_velocity_divisor: Option<f64>,
    #[arg(long)]
    cp_angle_divisor: Option<f64>,
    #[arg(long)]
    cp_angular_velocity_divisor: Option<f64>,
    #[arg(long)]
    mc_velocity_divisor: Option<f64>,
    /// Position divisor for MountainCar; 0 keeps the affine box map.
    #[arg(long)]
    mc_position_divisor: Option<f64>,
    /// Episode log CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to save trained weights.
    #[arg(long)]
    weights_out: Option<PathBuf>,
    /// Where to save the snapshot taken at the best 100-episode window.
    #[arg(long)]
    weights_best_out: Option<PathBuf>,
    /// Weights file to load.
    #[arg(long)]
    weights_in: Option<PathBuf>,
    /// Independent runs per sweep value.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads for sweeps (0 = automatic).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    /// Parameter to vary: bias | kappa.
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Summary CSV path (defaults to the rows path with `_summary`).
    #[arg(long)]
    summary_out: Option<PathBuf>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Overrides,
}

impl Overrides {
    fn into_config(self) -> photonrl::Result<ExperimentConfig> {
        let file_pairs = match &self.config {
            Some(path) => read_config_file(path)?,
            None => Vec::new(),
        };
        // the task decides the defaults, so resolve it first
        let task = match &self.task {
            Some(t) => *t,
            None => match file_pairs.iter().rev().find(|(k, _)| k == "task") {
                Some((_, v)) => v
                    .parse()
                    .map_err(photonrl::Error::Config)?,
                None => Task::CartPole,
            },
        };
        let mut cfg = ExperimentConfig::for_task(task);
        for (k, v) in &file_pairs {
            cfg.apply_kv(k, v)?;
        }
        cfg.task = task;
        if let Some(v) = self.episodes {
            cfg.episodes = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.mask_seed {
            cfg.mask_seed = Some(v);
        }
        if let Some(v) = self.tau_l {
            cfg.tau_l = v;
        }
        if let Some(v) = self.tau_h {
            cfg.tau_h = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = self.phi0 {
            cfg.phi0 = v;
        }
        if let Some(v) = self.noise_sigma {
            cfg.noise_sigma = v;
        }
        if let Some(v) = self.nodes {
            cfg.nodes = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.dt_divisor {
            cfg.dt_divisor = v;
        }
        if let Some(v) = &self.node_sampling {
            cfg.node_sampling = v.parse().map_err(photonrl::Error::Config)?;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.bias {
            cfg.bias = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.eps0 {
            cfg.eps0 = v;
        }
        if let Some(v) = self.k_eps {
            cfg.k_eps = v;
        }
        if let Some(v) = self.replay_capacity {
            cfg.replay_capacity = v;
        }
        if let Some(v) = self.minibatch {
            cfg.minibatch = v;
        }
        if self.averaged_updates {
            cfg.averaged_updates = true;
        }
        if let Some(v) = self.reservoir_reset {
            cfg.reservoir_reset = v;
        }
        if let Some(v) = self.truncation_bootstrap {
            cfg.truncation_bootstrap = v;
        }
        if let Some(v) = self.cp_position_divisor {
            cfg.cp_position_divisor = v;
        }
        if let Some(v) = self.cp_velocity_divisor {
            cfg.cp_velocity_divisor = v;
        }
        if let Some(v) = self.cp_angle_divisor {
            cfg.cp_angle_divisor = v;
        }
        if let Some(v) = self.cp_angular_velocity_divisor {
            cfg.cp_angular_velocity_divisor = v;
        }
        if let Some(v) = self.mc_velocity_divisor {
            cfg.mc_velocity_divisor = v;
        }
        if let Some(v) = self.mc_position_divisor {
            cfg.mc_position_divisor = v;
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        if let Some(v) = self.weights_out {
            cfg.weights_out = Some(v);
        }
        if let Some(v) = self.weights_in {
            cfg.weights_in = Some(v);
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        Ok(cfg)
    }
}

fn summarize(log: &TrainingLog, label: &str) {
    let episodes = log.records.len();
    let best = log
        .max_moving_avg_100()
        .map(|v| v.to_string())
        .unwrap_or_else(|| "n/a".into());
    let solved = log
        .solved_at
        .map(|e| format!("episode {e}"))
        .unwrap_or_else(|| "not reached".into());
    println!("{label}: {episodes} episodes, best moving_avg_100 = {best}, solved at {solved}");
}

fn run() -> photonrl::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let best_out = args.common.weights_best_out.clone();
            let cfg = args.common.into_config()?;
            let log = train(&cfg)?;
            summarize(&log, "train");
            if let Some(path) = &cfg.weights_out {
                save_weights(&log.weights, path)?;
                println!("weights written to {}", path.display());
            }
            if let Some(path) = &best_out {
                save_weights(&log.best_weights, path)?;
                match log.best_at {
                    Some(ep) => println!(
                        "best-window weights (episode {ep}) written to {}",
                        path.display()
                    ),
                    None => println!("best-window weights written to {}", path.display()),
                }
            }
            if let Some(path) = &cfg.out {
                println!("episode log written to {}", path.display());
            }
        }
        Command::Sweep(args) => {
            let param = args.param;
            let values = args.values.clone();
            let summary_out = args.summary_out.clone();
            let cfg = args.common.into_config()?;
            let table = sweep(&cfg, param, &values, cfg.trials)?;
            println!("param_value,mean,min,max");
            for s in &table.summary {
                println!("{},{},{},{}", s.value, s.mean, s.min, s.max);
            }
            if let Some(rows_path) = &cfg.out {
                let summary_path = summary_out.unwrap_or_else(|| {
                    let stem = rows_path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "sweep".into());
                    let ext = rows_path
                        .extension()
                        .map(|s| format!(".{}", s.to_string_lossy()))
                        .unwrap_or_default();
                    rows_path.with_file_name(format!("{stem}_summary{ext}"))
                });
                export_sweep_csv(&table, rows_path, &summary_path)?;
                println!(
                    "sweep tables written to {} and {}",
                    rows_path.display(),
                    summary_path.display()
                );
            }
        }
        Command::Eval(args) => {
            let cfg = args.common.into_config()?;
            let path = cfg.weights_in.clone().ok_or_else(|| {
                photonrl::Error::Config("eval requires --weights-in".into())
            })?;
            let weights = load_weights(&path)?;
            let log = evaluate_fixed(&weights, &cfg, cfg.episodes)?;
            summarize(&log, "eval");
            if let Some(path) = &cfg.out {
                println!("episode log written to {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
