//! Experiment configuration: one struct holding every knob of a training
//! run, with per-task defaults and a `key = value` config-file loader.

use std::path::{Path, PathBuf};

use crate::agent::{EpsilonSchedule, Hyperparams, DEFAULT_MINIBATCH, DEFAULT_REPLAY_CAPACITY};
use crate::envs::{
    CartPole, CartPoleNorm, Environment, MountainCar, MountainCarNorm, Task,
};
use crate::error::{Error, Result};
use crate::preprocess::InputScaling;
use crate::reservoir::{NodeSampling, ReservoirParams};

/// Full specification of a run. Defaults reproduce the numerical setup:
/// the Table of reservoir constants plus the task hyperparameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub episodes: usize,
    pub seed: u64,
    /// Mask seed override; defaults to `seed`. Evaluating saved weights
    /// under fresh seeds requires pinning the mask to the training run.
    pub mask_seed: Option<u64>,

    // reservoir
    pub tau_l: f64,
    pub tau_h: f64,
    pub tau: f64,
    pub beta: f64,
    pub kappa: f64,
    pub phi0: f64,
    pub noise_sigma: f64,
    pub nodes: usize,
    pub theta: f64,
    /// Integration step is theta / dt_divisor.
    pub dt_divisor: u32,
    pub node_sampling: NodeSampling,

    // preprocessing
    pub mu: f64,
    pub bias: f64,

    // agent
    pub alpha: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub k_eps: f64,
    pub replay_capacity: usize,
    pub minibatch: usize,
    pub averaged_updates: bool,
    /// Zero the reservoir at every episode start (default); turning it off
    /// runs the loop continuously across episodes.
    pub reservoir_reset: bool,
    /// Bootstrap the TD target through 200-step time-limit cuts (default);
    /// turning it off stores truncations as terminal transitions.
    pub truncation_bootstrap: bool,

    // observation normalization divisors
    pub cp_position_divisor: f64,
    pub cp_velocity_divisor: f64,
    pub cp_angle_divisor: f64,
    pub cp_angular_velocity_divisor: f64,
    pub mc_velocity_divisor: f64,
    /// 0 selects the affine box map for the position component.
    pub mc_position_divisor: f64,

    // outputs and parallelism
    pub out: Option<PathBuf>,
    pub weights_out: Option<PathBuf>,
    pub weights_in: Option<PathBuf>,
    pub trials: usize,
    /// Worker threads for sweeps; 0 picks the runtime default.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn for_task(task: Task) -> Self {
        let res = ReservoirParams::default();
        let scaling = InputScaling::default();
        let h = match task {
            Task::CartPole => Hyperparams::cartpole(),
            Task::MountainCar => Hyperparams::mountaincar(),
        };
        let eps = EpsilonSchedule::default();
        let cp = CartPoleNorm::default();
        let mc = MountainCarNorm::default();
        ExperimentConfig {
            task,
            episodes: match task {
                Task::CartPole => 500,
                Task::MountainCar => 1000,
            },
            seed: 0,
            mask_seed: None,
            tau_l: res.tau_l,
            tau_h: res.tau_h,
            tau: res.tau,
            beta: res.beta,
            kappa: res.kappa,
            phi0: res.phi0,
            noise_sigma: res.noise_sigma,
            nodes: res.n_nodes,
            theta: res.theta,
            dt_divisor: 8,
            node_sampling: res.sampling,
            mu: scaling.mu,
            bias: scaling.b,
            alpha: h.alpha,
            gamma: h.gamma,
            eps0: eps.eps0,
            k_eps: eps.k_eps,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            minibatch: DEFAULT_MINIBATCH,
            averaged_updates: false,
            reservoir_reset: true,
            truncation_bootstrap: true,
            cp_position_divisor: cp.position,
            cp_velocity_divisor: cp.velocity,
            cp_angle_divisor: cp.angle,
            cp_angular_velocity_divisor: cp.angular_velocity,
            mc_velocity_divisor: mc.velocity,
            mc_position_divisor: mc.position,
            out: None,
            weights_out: None,
            weights_in: None,
            trials: 10,
            jobs: 0,
        }
    }

    pub fn reservoir_params(&self) -> ReservoirParams {
        ReservoirParams {
            tau_l: self.tau_l,
            tau_h: self.tau_h,
            tau: self.tau,
            beta: self.beta,
            kappa: self.kappa,
            phi0: self.phi0,
            noise_sigma: self.noise_sigma,
            n_nodes: self.nodes,
            theta: self.theta,
            dt: self.theta / self.dt_divisor as f64,
            sampling: self.node_sampling,
        }
    }

    pub fn scaling(&self) -> InputScaling {
        InputScaling::new(self.mu, self.bias)
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            eps0: self.eps0,
            k_eps: self.k_eps,
        }
    }

    pub fn make_env(&self) -> Box<dyn Environment> {
        match self.task {
            Task::CartPole => Box::new(CartPole::new(CartPoleNorm {
                position: self.cp_position_divisor,
                velocity: self.cp_velocity_divisor,
                angle: self.cp_angle_divisor,
                angular_velocity: self.cp_angular_velocity_divisor,
            })),
            Task::MountainCar => Box::new(MountainCar::new(MountainCarNorm {
                velocity: self.mc_velocity_divisor,
                position: self.mc_position_divisor,
            })),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir_params().validate()?;
        self.hyperparams().validate()?;
        self.schedule().validate()?;
        if self.dt_divisor == 0 {
            return Err(Error::Config("dt-divisor must be positive".into()));
        }
        if self.replay_capacity == 0 {
            return Err(Error::Config("replay-capacity must be positive".into()));
        }
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch must be positive".into()));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("bias", self.bias),
            ("cp-position-divisor", self.cp_position_divisor),
            ("cp-velocity-divisor", self.cp_velocity_divisor),
            ("cp-angle-divisor", self.cp_angle_divisor),
            ("cp-angular-velocity-divisor", self.cp_angular_velocity_divisor),
            ("mc-velocity-divisor", self.mc_velocity_divisor),
            ("mc-position-divisor", self.mc_position_divisor),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` pair using the CLI flag names as keys.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {what}"));
        match key {
            "task" => self.task = value.parse().map_err(Error::Config)?,
            "episodes" => self.episodes = value.parse().map_err(|_| bad("episodes"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "mask-seed" => self.mask_seed = Some(value.parse().map_err(|_| bad("mask-seed"))?),
            "tau-l" => self.tau_l = value.parse().map_err(|_| bad("tau-l"))?,
            "tau-h" => self.tau_h = value.parse().map_err(|_| bad("tau-h"))?,
            "tau" => self.tau = value.parse().map_err(|_| bad("tau"))?,
            "beta" => self.beta = value.parse().map_err(|_| bad("beta"))?,
            "kappa" => self.kappa = value.parse().map_err(|_| bad("kappa"))?,
            "phi0" => self.phi0 = value.parse().map_err(|_| bad("phi0"))?,
            "noise-sigma" => self.noise_sigma = value.parse().map_err(|_| bad("noise-sigma"))?,
            "nodes" => self.nodes = value.parse().map_err(|_| bad("nodes"))?,
            "theta" => self.theta = value.parse().map_err(|_| bad("theta"))?,
            "dt-divisor" => self.dt_divisor = value.parse().map_err(|_| bad("dt-divisor"))?,
            "node-sampling" => self.node_sampling = value.parse().map_err(Error::Config)?,
            "mu" => self.mu = value.parse().map_err(|_| bad("mu"))?,
            "bias" => self.bias = value.parse().map_err(|_| bad("bias"))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad("gamma"))?,
            "eps0" => self.eps0 = value.parse().map_err(|_| bad("eps0"))?,
            "k-eps" => self.k_eps = value.parse().map_err(|_| bad("k-eps"))?,
            "replay-capacity" => {
                self.replay_capacity = value.parse().map_err(|_| bad("replay-capacity"))?
            }
            "minibatch" => self.minibatch = value.parse().map_err(|_| bad("minibatch"))?,
            "averaged-updates" => {
                self.averaged_updates = value.parse().map_err(|_| bad("averaged-updates"))?
            }
            "reservoir-reset" => {
                self.reservoir_reset = value.parse().map_err(|_| bad("reservoir-reset"))?
            }
            "truncation-bootstrap" => {
                self.truncation_bootstrap =
                    value.parse().map_err(|_| bad("truncation-bootstrap"))?
            }
            "cp-position-divisor" => {
                self.cp_position_divisor = value.parse().map_err(|_| bad("cp-position-divisor"))?
            }
            "cp-velocity-divisor" => {
                self.cp_velocity_divisor = value.parse().map_err(|_| bad("cp-velocity-divisor"))?
            }
            "cp-angle-divisor" => {
                self.cp_angle_divisor = value.parse().map_err(|_| bad("cp-angle-divisor"))?
            }
            "cp-angular-velocity-divisor" => {
                self.cp_angular_velocity_divisor =
                    value.parse().map_err(|_| bad("cp-angular-velocity-divisor"))?
            }
            "mc-velocity-divisor" => {
                self.mc_velocity_divisor = value.parse().map_err(|_| bad("mc-velocity-divisor"))?
            }
            "mc-position-divisor" => {
                self.mc_position_divisor = value.parse().map_err(|_| bad("mc-position-divisor"))?
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "weights-out" => self.weights_out = Some(PathBuf::from(value)),
            "weights-in" => self.weights_in = Some(PathBuf::from(value)),
            "trials" => self.trials = value.parse().map_err(|_| bad("trials"))?,
            "jobs" => self.jobs = value.parse().map_err(|_| bad("jobs"))?,
            other => {
                return Err(Error::Config(format!("unknown configuration key '{other}'")));
            }
        }
        Ok(())
    }
}

/// Reads a config file of `key = value` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected 'key = value'"))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_numerical_setup() {
        let cp = ExperimentConfig::for_task(Task::CartPole);
        assert_eq!(cp.nodes, 600);
        assert!((cp.theta - 0.4e-9).abs() < 1e-24);
        assert!((cp.tau - 239.6e-9).abs() < 1e-18);
        assert!((cp.kappa - 0.9).abs() < 1e-15);
        assert!((cp.mu - 0.6).abs() < 1e-15);
        assert!((cp.bias - 0.8).abs() < 1e-15);
        assert!((cp.alpha - 4e-4).abs() < 1e-18);
        assert!((cp.gamma - 0.995).abs() < 1e-15);
        assert_eq!(cp.replay_capacity, 4000);
        assert_eq!(cp.minibatch, 256);
        assert_eq!(cp.trials, 10);
        let mc = ExperimentConfig::for_task(Task::MountainCar);
        assert!((mc.alpha - 1e-5).abs() < 1e-18);
        let params = cp.reservoir_params();
        params.validate().unwrap();
        assert!((params.dt - 0.05e-9).abs() < 1e-24);
    }

    #[test]
    fn apply_kv_roundtrip() {
        let mut cfg = ExperimentConfig::for_task(Task::CartPole);
        cfg.apply_kv("bias", "0.55").unwrap();
        cfg.apply_kv("episodes", "42").unwrap();
        cfg.apply_kv("task", "mountaincar").unwrap();
        cfg.apply_kv("node-sampling", "mean").unwrap();
        assert_eq!(cfg.bias, 0.55);
        assert_eq!(cfg.episodes, 42);
        assert_eq!(cfg.task, Task::MountainCar);
        assert_eq!(cfg.node_sampling, NodeSampling::IntervalMean);
        assert!(cfg.apply_kv("no-such-key", "1").is_err());
        assert!(cfg.apply_kv("episodes", "many").is_err());
    }

    #[test]
    fn config_file_parsing() {
        let dir = std::env::temp_dir().join(format!("photonrl-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "# comment\n\ntask = mountaincar\nbias = 0.85\n").unwrap();
        let pairs = read_config_file(&path).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0], ("task".into(), "mountaincar".into()));
        std::fs::write(&path, "task mountaincar\n").unwrap();
        assert!(matches!(read_config_file(&path), Err(Error::Parse { line: 1, .. })));
        std::fs::remove_dir_all(&dir).ok();
    }
}
