//! Input preprocessing: random mask, state encoding and the piecewise
//! constant drive waveform.
//!
//! An environment state `s` (length N_s) becomes the per-node input vector
//! `u = (mu*s, b) M` where `M` is an (N_s + 1) x N mask with entries drawn
//! uniformly from [-1, 1]. The extra row couples the constant input bias `b`
//! into every node, which sets each node's operating point on the cos^2
//! nonlinearity. The vector is then stretched in time: node i holds value
//! u[i] for its interval of length theta.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random input-coupling weights, (N_s + 1) rows by N columns, row-major.
/// The last row couples the bias term.
#[derive(Debug, Clone)]
pub struct MaskMatrix {
    entries: Vec<f64>,
    n_inputs: usize,
    n_nodes: usize,
    seed: u64,
}

impl MaskMatrix {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row `p` (0-based; row `n_inputs` is the bias row).
    pub fn row(&self, p: usize) -> &[f64] {
        &self.entries[p * self.n_nodes..(p + 1) * self.n_nodes]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Input scaling mu and bias b applied before masking.
///
/// Defaults are the simulation values mu = 0.6, b = 0.8. The hardware
/// preset [`InputScaling::experiment`] uses mu = 0.5, b = 0.4.
#[derive(Debug, Clone, Copy)]
pub struct InputScaling {
    pub mu: f64,
    pub b: f64,
}

impl Default for InputScaling {
    fn default() -> Self {
        InputScaling { mu: 0.6, b: 0.8 }
    }
}

impl InputScaling {
    pub fn new(mu: f64, b: f64) -> Self {
        InputScaling { mu, b }
    }

    /// Scaling used with the tabletop hardware setup.
    pub fn experiment() -> Self {
        InputScaling { mu: 0.5, b: 0.4 }
    }
}

/// Draws the (N_s + 1) x N mask, entries i.i.d. uniform on [-1, 1],
/// reproducible from the seed.
pub fn generate_mask(seed: u64, n_nodes: usize, n_inputs: usize) -> Result<MaskMatrix> {
    if n_nodes == 0 || n_inputs == 0 {
        return Err(Error::Config(format!(
            "mask dimensions must be positive, got {n_inputs} inputs x {n_nodes} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..(n_inputs + 1) * n_nodes)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    Ok(MaskMatrix {
        entries,
        n_inputs,
        n_nodes,
        seed,
    })
}

/// Encodes a state into the length-N node input vector:
/// `u[i] = mu * sum_p M[p][i] s[p] + b * M[N_s][i]`.
pub fn encode_state(state: &[f64], mask: &MaskMatrix, scaling: InputScaling) -> Result<Vec<f64>> {
    if state.len() != mask.n_inputs {
        return Err(Error::Dimension(format!(
            "state has {} components, mask expects {}",
            state.len(),
            mask.n_inputs
        )));
    }
    let n = mask.n_nodes;
    let mut u = vec![0.0; n];
    for (p, &s) in state.iter().enumerate() {
        let w = scaling.mu * s;
        for (ui, &m) in u.iter_mut().zip(mask.row(p)) {
            *ui += w * m;
        }
    }
    for (ui, &m) in u.iter_mut().zip(mask.row(mask.n_inputs)) {
        *ui += scaling.b * m;
    }
    Ok(u)
}

/// Piecewise-constant drive over one mask period: value i holds on the
/// half-open interval [(i-1) theta, i theta).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    values: Vec<f64>,
    theta: f64,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Total span T_m = N * theta.
    pub fn span(&self) -> f64 {
        self.values.len() as f64 * self.theta
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    /// u(t) for t in [0, T_m); None outside.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return None;
        }
        let idx = (t / self.theta).floor() as usize;
        self.values.get(idx).copied()
    }
}

/// Stretches the node input vector to node intervals of length `theta`.
pub fn build_waveform(node_inputs: Vec<f64>, theta: f64) -> Waveform {
    Waveform {
        values: node_inputs,
        theta,
    }
}
