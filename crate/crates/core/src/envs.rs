//! CartPole-v0 and MountainCar-v0 dynamics, implemented from the classic
//! control equations, with episode bookkeeping and observation normalization
//! for the reservoir input.
//!
//! Termination by failure/goal is reported as `terminal`; hitting the
//! 200-step limit is reported as `truncated`. The agent bootstraps through
//! truncations but not through terminals.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Step limit for both tasks.
pub const EPISODE_STEP_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    CartPole,
    MountainCar,
}

impl Task {
    pub fn state_dim(&self) -> usize {
        match self {
            Task::CartPole => 4,
            Task::MountainCar => 2,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Task::CartPole => 2,
            Task::MountainCar => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::CartPole => "cartpole",
            Task::MountainCar => "mountaincar",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cartpole" => Ok(Task::CartPole),
            "mountaincar" => Ok(Task::MountainCar),
            other => Err(format!("unknown task '{other}' (expected cartpole|mountaincar)")),
        }
    }
}

/// Outcome of one environment step. `observation` is already normalized for
/// the reservoir input.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Starts a new episode and returns the normalized initial observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Advances one step. Stepping a finished episode is a usage error.
    fn step(&mut self, action: usize) -> Result<StepResult>;
}

// ---------------------------------------------------------------------------
// CartPole
// ---------------------------------------------------------------------------

pub const CARTPOLE_GRAVITY: f64 = 9.8;
pub const CARTPOLE_CART_MASS: f64 = 1.0;
pub const CARTPOLE_POLE_MASS: f64 = 0.1;
/// Half the pole length.
pub const CARTPOLE_POLE_LENGTH: f64 = 0.5;
pub const CARTPOLE_FORCE: f64 = 10.0;
pub const CARTPOLE_TIME_STEP: f64 = 0.02;
pub const CARTPOLE_X_LIMIT: f64 = 2.4;
/// 12 degrees in radians.
pub const CARTPOLE_ANGLE_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const CARTPOLE_INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub angle: f64,
    pub angle_dot: f64,
}

impl CartPoleState {
    pub fn is_failed(&self) -> bool {
        self.x.abs() > CARTPOLE_X_LIMIT || self.angle.abs() > CARTPOLE_ANGLE_LIMIT
    }
}

/// One Euler step of the cart-pole equations. Action 0 pushes left,
/// action 1 pushes right.
pub fn cartpole_dynamics(s: &CartPoleState, action: usize) -> CartPoleState {
    let force = if action == 1 { CARTPOLE_FORCE } else { -CARTPOLE_FORCE };
    let total_mass = CARTPOLE_CART_MASS + CARTPOLE_POLE_MASS;
    let pole_mass_length = CARTPOLE_POLE_MASS * CARTPOLE_POLE_LENGTH;
    let cos_t = s.angle.cos();
    let sin_t = s.angle.sin();
    let temp = (force + pole_mass_length * s.angle_dot * s.angle_dot * sin_t) / total_mass;
    let angle_acc = (CARTPOLE_GRAVITY * sin_t - cos_t * temp)
        / (CARTPOLE_POLE_LENGTH * (4.0 / 3.0 - CARTPOLE_POLE_MASS * cos_t * cos_t / total_mass));
    let x_acc = temp - pole_mass_length * angle_acc * cos_t / total_mass;
    CartPoleState {
        x: s.x + CARTPOLE_TIME_STEP * s.x_dot,
        x_dot: s.x_dot + CARTPOLE_TIME_STEP * x_acc,
        angle: s.angle + CARTPOLE_TIME_STEP * s.angle_dot,
        angle_dot: s.angle_dot + CARTPOLE_TIME_STEP * angle_acc,
    }
}

/// Normalization divisors for the four CartPole observation components.
/// Position and angle default to their termination bounds; the two
/// velocities to a fixed 3.0 (values beyond that are rare before the
/// episode ends anyway).
#[derive(Debug, Clone, Copy)]
pub struct CartPoleNorm {
    pub position: f64,
    pub velocity: f64,
    pub angle: f64,
    pub angular_velocity: f64,
}

impl Default for CartPoleNorm {
    fn default() -> Self {
        CartPoleNorm {
            position: CARTPOLE_X_LIMIT,
            velocity: 3.0,
            angle: CARTPOLE_ANGLE_LIMIT,
            angular_velocity: 3.0,
        }
    }
}

pub fn normalize_cartpole(s: &CartPoleState, norm: &CartPoleNorm) -> Vec<f64> {
    vec![
        s.x / norm.position,
        s.x_dot / norm.velocity,
        s.angle / norm.angle,
        s.angle_dot / norm.angular_velocity,
    ]
}

pub struct CartPole {
    state: CartPoleState,
    steps: usize,
    done: bool,
    norm: CartPoleNorm,
}

impl CartPole {
    pub fn new(norm: CartPoleNorm) -> Self {
        CartPole {
            state: CartPoleState::default(),
            steps: 0,
            done: true,
            norm,
        }
    }

    pub fn state(&self) -> &CartPoleState {
        &self.state
    }
}

impl Environment for CartPole {
    fn obs_dim(&self) -> usize {
        4
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let r = CARTPOLE_INIT_RANGE;
        self.state = CartPoleState {
            x: rng.gen_range(-r..=r),
            x_dot: rng.gen_range(-r..=r),
            angle: rng.gen_range(-r..=r),
            angle_dot: rng.gen_range(-r..=r),
        };
        self.steps = 0;
        self.done = false;
        normalize_cartpole(&self.state, &self.norm)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("stepping a finished CartPole episode".into()));
        }
        if action >= 2 {
            return Err(Error::Dimension(format!("CartPole action {action} out of range")));
        }
        self.state = cartpole_dynamics(&self.state, action);
        self.steps += 1;
        let terminal = self.state.is_failed();
        let truncated = self.steps >= EPISODE_STEP_LIMIT;
        self.done = terminal || truncated;
        Ok(StepResult {
            observation: normalize_cartpole(&self.state, &self.norm),
            reward: 1.0,
            terminal,
            truncated,
        })
    }
}

// ---------------------------------------------------------------------------
// MountainCar
// ---------------------------------------------------------------------------

pub const MOUNTAINCAR_MIN_POSITION: f64 = -1.2;
pub const MOUNTAINCAR_MAX_POSITION: f64 = 0.6;
pub const MOUNTAINCAR_MAX_SPEED: f64 = 0.07;
pub const MOUNTAINCAR_GOAL_POSITION: f64 = 0.5;
pub const MOUNTAINCAR_FORCE: f64 = 0.001;
pub const MOUNTAINCAR_GRAVITY: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    pub fn at_goal(&self) -> bool {
        self.position >= MOUNTAINCAR_GOAL_POSITION
    }
}

/// One step of the mountain-car equations. Action 0 pushes left, 1 is
/// neutral, 2 pushes right.
pub fn mountaincar_dynamics(s: &MountainCarState, action: usize) -> MountainCarState {
    let mut velocity = s.velocity
        + (action as f64 - 1.0) * MOUNTAINCAR_FORCE
        + (3.0 * s.position).cos() * (-MOUNTAINCAR_GRAVITY);
    velocity = velocity.clamp(-MOUNTAINCAR_MAX_SPEED, MOUNTAINCAR_MAX_SPEED);
    let mut position = s.position + velocity;
    position = position.clamp(MOUNTAINCAR_MIN_POSITION, MOUNTAINCAR_MAX_POSITION);
    if position == MOUNTAINCAR_MIN_POSITION && velocity < 0.0 {
        velocity = 0.0;
    }
    MountainCarState { position, velocity }
}

/// MountainCar normalization: velocity divided by the configured bound;
/// position either divided by a magnitude bound or, with `position`
/// set to 0, mapped affinely from its box onto [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct MountainCarNorm {
    pub velocity: f64,
    /// Position divisor; 0 selects the affine box map.
    pub position: f64,
}

impl Default for MountainCarNorm {
    fn default() -> Self {
        MountainCarNorm {
            velocity: MOUNTAINCAR_MAX_SPEED,
            position: 0.0,
        }
    }
}

pub fn normalize_mountaincar(s: &MountainCarState, norm: &MountainCarNorm) -> Vec<f64> {
    let pos = if norm.position > 0.0 {
        s.position / norm.position
    } else {
        let mid = (MOUNTAINCAR_MIN_POSITION + MOUNTAINCAR_MAX_POSITION) / 2.0;
        let half = (MOUNTAINCAR_MAX_POSITION - MOUNTAINCAR_MIN_POSITION) / 2.0;
        (s.position - mid) / half
    };
    vec![pos, s.velocity / norm.velocity]
}

pub struct MountainCar {
    state: MountainCarState,
    steps: usize,
    done: bool,
    norm: MountainCarNorm,
}

impl MountainCar {
    pub fn new(norm: MountainCarNorm) -> Self {
        MountainCar {
            state: MountainCarState::default(),
            steps: 0,
            done: true,
            norm,
        }
    }

    pub fn state(&self) -> &MountainCarState {
        &self.state
    }
}

impl Environment for MountainCar {
    fn obs_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.state = MountainCarState {
            position: rng.gen_range(-0.6..=-0.4),
            velocity: 0.0,
        };
        self.steps = 0;
        self.done = false;
        normalize_mountaincar(&self.state, &self.norm)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("stepping a finished MountainCar episode".into()));
        }
        if action >= 3 {
            return Err(Error::Dimension(format!("MountainCar action {action} out of range")));
        }
        self.state = mountaincar_dynamics(&self.state, action);
        self.steps += 1;
        let terminal = self.state.at_goal();
        let truncated = self.steps >= EPISODE_STEP_LIMIT;
        self.done = terminal || truncated;
        Ok(StepResult {
            observation: normalize_mountaincar(&self.state, &self.norm),
            reward: -1.0,
            terminal,
            truncated,
        })
    }
}
