//! Training orchestration: the episode loop, multi-episode training with
//! success detection, parameter sweeps over independent trials, and
//! fixed-weight evaluation.
//!
//! Every random stream (mask, weight init, environment resets, reservoir
//! noise, replay sampling, exploration draws) is derived deterministically
//! from the config seed, so identical configs produce identical logs and
//! sweep trials can run on any number of threads without changing results.

mod config;
mod io;

pub use config::{read_config_file, ExperimentConfig};
pub use io::{export_csv, export_sweep_csv, load_weights, read_csv, save_weights, CSV_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{ReadoutWeights, ReplayBuffer, Transition};
use crate::envs::{Environment, Task};
use crate::error::{Error, Result};
use crate::preprocess::{build_waveform, encode_state, generate_mask, MaskMatrix};
use crate::reservoir::{NodeVector, Reservoir};

/// Per-episode log line.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 0-based episode index (the exploration schedule's n_ep).
    pub episode: usize,
    pub steps: usize,
    pub total_reward: f64,
    /// Mean of the most recent <= 100 episode totals, this one included.
    pub moving_avg_100: f64,
    /// Exploration rate used for this episode.
    pub epsilon: f64,
}

/// Result of a training or evaluation run.
#[derive(Debug, Clone)]
pub struct TrainingLog {
    pub records: Vec<EpisodeRecord>,
    /// First episode satisfying the task's success criterion:
    /// CartPole - 100 consecutive totals of 200; MountainCar - moving
    /// average at least -110.
    pub solved_at: Option<usize>,
    /// Readout weights at the end of the run.
    pub weights: ReadoutWeights,
    /// Snapshot taken at the end of the best recent stretch of episodes
    /// (highest trailing-20 mean total); training keeps drifting afterwards,
    /// so this is the readout worth freezing.
    pub best_weights: ReadoutWeights,
    /// Episode index of the snapshot, if one was taken.
    pub best_at: Option<usize>,
}

impl TrainingLog {
    /// Maximum moving average over full 100-episode windows; falls back to
    /// the last record when the run is shorter than a window.
    pub fn max_moving_avg_100(&self) -> Option<f64> {
        let full: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.episode >= 99)
            .map(|r| r.moving_avg_100)
            .collect();
        if full.is_empty() {
            self.records.last().map(|r| r.moving_avg_100)
        } else {
            full.into_iter().reduce(f64::max)
        }
    }
}

// Stream tags for the seed fan-out.
const STREAM_MASK: u64 = 1;
const STREAM_WEIGHTS: u64 = 2;
const STREAM_ENV: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_REPLAY: u64 = 5;
const STREAM_POLICY: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a stream tag.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// Seed for one sweep cell (parameter value index x trial index).
pub fn trial_seed(base: u64, value_index: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(base, 0x5EED_0000 + value_index as u64), 0x7A1A_0000 + trial as u64)
}

/// All mutable state of one run: reservoir, mask, readout, replay memory,
/// environment, and the derived random streams.
pub struct Trainer {
    cfg: ExperimentConfig,
    reservoir: Reservoir,
    mask: MaskMatrix,
    pub weights: ReadoutWeights,
    buffer: ReplayBuffer,
    env: Box<dyn Environment>,
    env_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mask_base = cfg.mask_seed.unwrap_or(cfg.seed);
        let mask = generate_mask(
            derive_seed(mask_base, STREAM_MASK),
            cfg.nodes,
            cfg.task.state_dim(),
        )?;
        let weights = ReadoutWeights::init(
            cfg.nodes,
            cfg.task.num_actions(),
            derive_seed(cfg.seed, STREAM_WEIGHTS),
        )?;
        Self::assemble(cfg, mask, weights)
    }

    /// Builds a run around existing weights (fixed-weight evaluation or a
    /// resumed readout). The mask is derived from `mask_seed`/`seed` exactly
    /// as in training, so evaluation must pin `mask_seed` to the training
    /// seed for the weights to mean anything.
    pub fn with_weights(cfg: &ExperimentConfig, weights: ReadoutWeights) -> Result<Self> {
        cfg.validate()?;
        if weights.nodes() != cfg.nodes || weights.actions() != cfg.task.num_actions() {
            return Err(Error::Dimension(format!(
                "weights are {} x {}, config expects {} x {}",
                weights.actions(),
                weights.nodes(),
                cfg.task.num_actions(),
                cfg.nodes
            )));
        }
        let mask_base = cfg.mask_seed.unwrap_or(cfg.seed);
        let mask = generate_mask(
            derive_seed(mask_base, STREAM_MASK),
            cfg.nodes,
            cfg.task.state_dim(),
        )?;
        Self::assemble(cfg, mask, weights)
    }

    fn assemble(cfg: &ExperimentConfig, mask: MaskMatrix, weights: ReadoutWeights) -> Result<Self> {
        let reservoir = Reservoir::new(cfg.reservoir_params(), derive_seed(cfg.seed, STREAM_NOISE))?;
        let buffer = ReplayBuffer::new(cfg.replay_capacity, derive_seed(cfg.seed, STREAM_REPLAY));
        Ok(Trainer {
            reservoir,
            mask,
            weights,
            buffer,
            env: cfg.make_env(),
            env_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_ENV)),
            policy_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_POLICY)),
            cfg: cfg.clone(),
        })
    }

    pub fn mask(&self) -> &MaskMatrix {
        &self.mask
    }

    fn drive_observation(&mut self, obs: &[f64]) -> Result<NodeVector> {
        let u = encode_state(obs, &self.mask, self.cfg.scaling())?;
        let wf = build_waveform(u, self.cfg.theta);
        self.reservoir.drive(&wf)
    }

    /// Runs one episode: reset reservoir and environment, then per step
    /// encode the observation, drive the reservoir, pick the action
    /// epsilon-greedily from the readout, step the environment, store the
    /// transition (its successor node vector is completed on the next
    /// iteration) and replay-update the readout. With `learn = false` the
    /// readout and replay memory are left untouched.
    pub fn run_episode(&mut self, epsilon: f64, learn: bool) -> Result<(usize, f64)> {
        if self.cfg.reservoir_reset {
            self.reservoir.reset_state();
        }
        let mut obs = self.env.reset(&mut self.env_rng);
        let mut total = 0.0;
        let mut steps = 0usize;
        // transition from the previous step awaiting its successor node vector
        let mut pending: Option<(NodeVector, usize, f64)> = None;

        loop {
            let v = self.drive_observation(&obs)?;
            if let Some((v_prev, action, reward)) = pending.take() {
                if learn {
                    self.buffer.push(Transition {
                        v_now: v_prev,
                        v_next: v.clone(),
                        action,
                        reward,
                        terminal: false,
                    });
                }
            }
            let q = self.weights.q_values(&v)?;
            let action = crate::agent::select_action(&q, epsilon, &mut self.policy_rng)?;
            let step = self.env.step(action)?;
            total += step.reward;
            steps += 1;

            if step.terminal {
                if learn {
                    self.buffer.push(Transition {
                        v_now: v,
                        v_next: NodeVector::zeros(self.cfg.nodes),
                        action,
                        reward: step.reward,
                        terminal: true,
                    });
                    self.replay_update()?;
                }
                break;
            } else if step.truncated {
                if learn {
                    if self.cfg.truncation_bootstrap {
                        // bootstrapping through the cut needs the successor
                        // node vector
                        let v_next = self.drive_observation(&step.observation)?;
                        self.buffer.push(Transition {
                            v_now: v,
                            v_next,
                            action,
                            reward: step.reward,
                            terminal: false,
                        });
                    } else {
                        self.buffer.push(Transition {
                            v_now: v,
                            v_next: NodeVector::zeros(self.cfg.nodes),
                            action,
                            reward: step.reward,
                            terminal: true,
                        });
                    }
                    self.replay_update()?;
                }
                break;
            } else {
                pending = Some((v, action, step.reward));
                if learn {
                    self.replay_update()?;
                }
                obs = step.observation;
            }
        }
        Ok((steps, total))
    }

    fn replay_update(&mut self) -> Result<()> {
        let h = self.cfg.hyperparams();
        if self.cfg.averaged_updates {
            self.buffer
                .replay_update_averaged(&mut self.weights, h, self.cfg.minibatch)
        } else {
            self.buffer.replay_update(&mut self.weights, h, self.cfg.minibatch)
        }
    }
}

fn moving_avg_100(totals: &[f64]) -> f64 {
    let window = &totals[totals.len().saturating_sub(100)..];
    window.iter().sum::<f64>() / window.len() as f64
}

/// Trains for `cfg.episodes` episodes and returns the full log. When
/// `cfg.out` is set the CSV is written on completion, and also flushed with
/// whatever episodes finished if the run aborts on divergence.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainingLog> {
    let mut trainer = Trainer::new(cfg)?;
    let schedule = cfg.schedule();
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut totals = Vec::with_capacity(cfg.episodes);
    let mut solved_at = None;
    let mut consecutive_full = 0usize;
    let mut best_avg = f64::NEG_INFINITY;
    let mut best_weights = trainer.weights.clone();
    let mut best_at = None;

    for episode in 0..cfg.episodes {
        let epsilon = schedule.epsilon_at(episode);
        let (steps, total) = match trainer.run_episode(epsilon, true) {
            Ok(r) => r,
            Err(e) => {
                // flush the partial log before aborting
                if let Some(path) = &cfg.out {
                    let partial = TrainingLog {
                        records,
                        solved_at,
                        weights: trainer.weights.clone(),
                        best_weights,
                        best_at,
                    };
                    let _ = export_csv(&partial, path);
                }
                return Err(e);
            }
        };
        totals.push(total);
        let avg = moving_avg_100(&totals);
        records.push(EpisodeRecord {
            episode,
            steps,
            total_reward: total,
            moving_avg_100: avg,
            epsilon,
        });
        if episode >= 19 {
            let recent = &totals[totals.len() - 20..];
            let recent_mean = recent.iter().sum::<f64>() / 20.0;
            if recent_mean > best_avg {
                best_avg = recent_mean;
                best_weights = trainer.weights.clone();
                best_at = Some(episode);
            }
        }
        if solved_at.is_none() {
            match cfg.task {
                Task::CartPole => {
                    if total == 200.0 {
                        consecutive_full += 1;
                    } else {
                        consecutive_full = 0;
                    }
                    if consecutive_full >= 100 {
                        solved_at = Some(episode);
                    }
                }
                Task::MountainCar => {
                    // a full window of 100 trials must average -110
                    if episode >= 99 && avg >= -110.0 {
                        solved_at = Some(episode);
                    }
                }
            }
        }
    }

    if best_at.is_none() {
        best_weights = trainer.weights.clone();
    }
    let log = TrainingLog {
        records,
        solved_at,
        weights: trainer.weights.clone(),
        best_weights,
        best_at,
    };
    if let Some(path) = &cfg.out {
        export_csv(&log, path)?;
    }
    Ok(log)
}

/// Runs `episodes` greedy episodes (epsilon = 0) with frozen weights and no
/// replay writes.
pub fn evaluate_fixed(
    weights: &ReadoutWeights,
    cfg: &ExperimentConfig,
    episodes: usize,
) -> Result<TrainingLog> {
    let mut trainer = Trainer::with_weights(cfg, weights.clone())?;
    let mut records = Vec::with_capacity(episodes);
    let mut totals = Vec::with_capacity(episodes);
    let mut solved_at = None;
    let mut consecutive_full = 0usize;
    for episode in 0..episodes {
        let (steps, total) = trainer.run_episode(0.0, false)?;
        totals.push(total);
        let avg = moving_avg_100(&totals);
        records.push(EpisodeRecord {
            episode,
            steps,
            total_reward: total,
            moving_avg_100: avg,
            epsilon: 0.0,
        });
        if solved_at.is_none() {
            match cfg.task {
                Task::CartPole => {
                    if total == 200.0 {
                        consecutive_full += 1;
                    } else {
                        consecutive_full = 0;
                    }
                    if consecutive_full >= 100 {
                        solved_at = Some(episode);
                    }
                }
                Task::MountainCar => {
                    // a full window of 100 trials must average -110
                    if episode >= 99 && avg >= -110.0 {
                        solved_at = Some(episode);
                    }
                }
            }
        }
    }
    let log = TrainingLog {
        records,
        solved_at,
        weights: trainer.weights.clone(),
        best_weights: trainer.weights.clone(),
        best_at: None,
    };
    if let Some(path) = &cfg.out {
        export_csv(&log, path)?;
    }
    Ok(log)
}

/// Which configuration field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Bias,
    Kappa,
}

impl SweepParam {
    fn apply(&self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepParam::Bias => cfg.bias = value,
            SweepParam::Kappa => cfg.kappa = value,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Bias => "bias",
            SweepParam::Kappa => "kappa",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bias" | "b" => Ok(SweepParam::Bias),
            "kappa" | "k" => Ok(SweepParam::Kappa),
            other => Err(format!("unknown sweep parameter '{other}' (expected bias|kappa)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub trial: usize,
    pub max_moving_avg_100: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummaryRow {
    pub value: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummaryRow>,
}

/// Trains `trials` independent runs per parameter value (seeds derived per
/// cell from the base seed) and tabulates each run's maximum 100-episode
/// moving average. Runs execute in parallel across `cfg.jobs` threads;
/// results do not depend on the thread count.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    trials: usize,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one parameter value".into()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut jobs = Vec::with_capacity(values.len() * trials);
    for (vi, &value) in values.iter().enumerate() {
        for trial in 0..trials {
            let mut run_cfg = cfg.clone();
            param.apply(&mut run_cfg, value);
            run_cfg.seed = trial_seed(cfg.seed, vi, trial);
            run_cfg.out = None;
            run_cfg.weights_out = None;
            jobs.push((vi, value, trial, run_cfg));
        }
    }

    let run_all = || -> Result<Vec<SweepRow>> {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(_, value, trial, run_cfg)| {
                let log = train(run_cfg)?;
                Ok(SweepRow {
                    value: *value,
                    trial: *trial,
                    max_moving_avg_100: log.max_moving_avg_100().unwrap_or(f64::NEG_INFINITY),
                })
            })
            .collect()
    };
    let rows = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all)?
    } else {
        run_all()?
    };

    let summary = values
        .iter()
        .enumerate()
        .map(|(vi, &value)| {
            let cell: Vec<f64> = rows[vi * trials..(vi + 1) * trials]
                .iter()
                .map(|r| r.max_moving_avg_100)
                .collect();
            SweepSummaryRow {
                value,
                mean: cell.iter().sum::<f64>() / cell.len() as f64,
                min: cell.iter().cloned().fold(f64::INFINITY, f64::min),
                max: cell.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();

    Ok(SweepTable { rows, summary })
}
