//! Linear action-value readout trained with Q-learning over replayed
//! transitions.
//!
//! The Q value of action `a` is the dot product of that action's weight row
//! with the node vector. The update for a sampled transition is
//!
//! ```text
//! delta = r + gamma * max_a' w_a' . v_next - w_a . v     (bootstrap dropped
//! w_a += alpha * delta * v                                on terminal)
//! ```
//!
//! Transitions store node vectors rather than raw environment states: the
//! update consumes node vectors, and regenerating them would mean re-driving
//! the stateful reservoir.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::reservoir::NodeVector;

pub const DEFAULT_REPLAY_CAPACITY: usize = 4000;
pub const DEFAULT_MINIBATCH: usize = 256;

/// One weight row per action, A x N row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    w: Vec<f64>,
    actions: usize,
    nodes: usize,
}

impl ReadoutWeights {
    /// Entries i.i.d. uniform on [-0.1, 0.1], reproducible from the seed.
    pub fn init(nodes: usize, actions: usize, seed: u64) -> Result<Self> {
        if nodes == 0 || actions == 0 {
            return Err(Error::Config(format!(
                "weight dimensions must be positive, got {actions} x {nodes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..actions * nodes)
            .map(|_| rng.gen_range(-0.1..=0.1))
            .collect();
        Ok(ReadoutWeights { w, actions, nodes })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let actions = rows.len();
        let nodes = rows.first().map(|r| r.len()).unwrap_or(0);
        if actions == 0 || nodes == 0 {
            return Err(Error::Config("weights must be non-empty".into()));
        }
        if rows.iter().any(|r| r.len() != nodes) {
            return Err(Error::Dimension("ragged weight rows".into()));
        }
        Ok(ReadoutWeights {
            w: rows.into_iter().flatten().collect(),
            actions,
            nodes,
        })
    }

    pub fn zeros(nodes: usize, actions: usize) -> Self {
        ReadoutWeights {
            w: vec![0.0; actions * nodes],
            actions,
            nodes,
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.w[action * self.nodes..(action + 1) * self.nodes]
    }

    fn row_mut(&mut self, action: usize) -> &mut [f64] {
        &mut self.w[action * self.nodes..(action + 1) * self.nodes]
    }

    /// Q_a = w_a . v for every action.
    pub fn q_values(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.nodes {
            return Err(Error::Dimension(format!(
                "node vector length {} does not match weights ({} nodes)",
                v.len(),
                self.nodes
            )));
        }
        Ok((0..self.actions).map(|a| dot(self.row(a), v)).collect())
    }

    fn max_q(&self, v: &[f64]) -> f64 {
        (0..self.actions)
            .map(|a| dot(self.row(a), v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies one Q-learning update for the transition. Only the taken
    /// action's row changes; the bootstrap term is dropped on terminal
    /// transitions (time-limit truncations are stored as non-terminal and do
    /// bootstrap).
    pub fn td_update(&mut self, t: &Transition, h: Hyperparams) -> Result<()> {
        if t.v_now.len() != self.nodes || (!t.terminal && t.v_next.len() != self.nodes) {
            return Err(Error::Dimension(
                "transition node vectors do not match weight dimensions".into(),
            ));
        }
        if t.action >= self.actions {
            return Err(Error::Dimension(format!(
                "action {} out of range ({} actions)",
                t.action, self.actions
            )));
        }
        let q_now = dot(self.row(t.action), &t.v_now);
        let target = if t.terminal {
            t.reward
        } else {
            t.reward + h.gamma * self.max_q(&t.v_next)
        };
        let delta = target - q_now;
        if !delta.is_finite() {
            return Err(Error::Divergence(format!(
                "TD error non-finite (delta = {delta}, reward = {})",
                t.reward
            )));
        }
        let step = h.alpha * delta;
        for (w, &v) in self.row_mut(t.action).iter_mut().zip(t.v_now.iter()) {
            *w += step * v;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Step size and discount rate. Task defaults: CartPole alpha = 4e-4,
/// MountainCar alpha = 1e-5, gamma = 0.995 for both.
#[derive(Debug, Clone, Copy)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Hyperparams {
    pub fn cartpole() -> Self {
        Hyperparams {
            alpha: 0.000400,
            gamma: 0.995,
        }
    }

    pub fn mountaincar() -> Self {
        Hyperparams {
            alpha: 0.000010,
            gamma: 0.995,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 || self.gamma >= 1.0 {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Stored experience: node vectors before and after the step, the action
/// taken, the reward received, and whether the episode failed/finished
/// (not a time-limit cut).
#[derive(Debug, Clone)]
pub struct Transition {
    pub v_now: NodeVector,
    pub v_next: NodeVector,
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// FIFO experience memory with uniform minibatch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: VecDeque<Transition>,
    capacity: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, sample_seed: u64) -> Self {
        ReplayBuffer {
            storage: VecDeque::with_capacity(capacity.min(8192)),
            capacity: capacity.max(1),
            rng: ChaCha8Rng::seed_from_u64(sample_seed),
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// Appends a transition, evicting the oldest when full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    /// Samples min(minibatch, len) transitions uniformly without replacement
    /// and applies `td_update` to each in sampled order. An empty buffer is
    /// a no-op.
    pub fn replay_update(
        &mut self,
        weights: &mut ReadoutWeights,
        h: Hyperparams,
        minibatch: usize,
    ) -> Result<()> {
        if self.storage.is_empty() || minibatch == 0 {
            return Ok(());
        }
        let k = minibatch.min(self.storage.len());
        let picks = rand::seq::index::sample(&mut self.rng, self.storage.len(), k);
        for idx in picks {
            let t = &self.storage[idx];
            weights.td_update(t, h)?;
        }
        Ok(())
    }

    /// Variant that averages the weight increments over the minibatch
    /// against the pre-update weights and applies them once.
    pub fn replay_update_averaged(
        &mut self,
        weights: &mut ReadoutWeights,
        h: Hyperparams,
        minibatch: usize,
    ) -> Result<()> {
        if self.storage.is_empty() || minibatch == 0 {
            return Ok(());
        }
        let k = minibatch.min(self.storage.len());
        let picks = rand::seq::index::sample(&mut self.rng, self.storage.len(), k);
        let mut grad = vec![0.0; weights.actions * weights.nodes];
        let scale = h.alpha / k as f64;
        for idx in picks {
            let t = &self.storage[idx];
            let q_now = dot(weights.row(t.action), &t.v_now);
            let target = if t.terminal {
                t.reward
            } else {
                t.reward + h.gamma * weights.max_q(&t.v_next)
            };
            let delta = target - q_now;
            if !delta.is_finite() {
                return Err(Error::Divergence(format!("TD error non-finite (delta = {delta})")));
            }
            let base = t.action * weights.nodes;
            for (g, &v) in grad[base..base + weights.nodes].iter_mut().zip(t.v_now.iter()) {
                *g += scale * delta * v;
            }
        }
        for (w, g) in weights.w.iter_mut().zip(&grad) {
            *w += g;
        }
        Ok(())
    }
}

/// Exploration schedule: eps = eps0 + (1 - eps0) exp(-k_eps * n_ep).
/// The first episode (n_ep = 0) explores with eps = 1.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub k_eps: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps0: 0.01,
            k_eps: 0.04,
        }
    }
}

impl EpsilonSchedule {
    pub fn epsilon_at(&self, n_ep: usize) -> f64 {
        self.eps0 + (1.0 - self.eps0) * (-self.k_eps * n_ep as f64).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps0) {
            return Err(Error::Config(format!("eps0 must lie in [0, 1], got {}", self.eps0)));
        }
        if !self.k_eps.is_finite() || self.k_eps <= 0.0 {
            return Err(Error::Config(format!("k_eps must be positive, got {}", self.k_eps)));
        }
        Ok(())
    }
}

/// Greedy argmax with ties broken toward the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy selection: the greedy action with probability 1 - epsilon,
/// otherwise uniform over all actions.
pub fn select_action(q: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
    if q.is_empty() {
        return Err(Error::Dimension("empty Q vector".into()));
    }
    if epsilon > 0.0 && rng.gen_range(0.0..1.0) < epsilon {
        Ok(rng.gen_range(0..q.len()))
    } else {
        Ok(argmax(q))
    }
}
