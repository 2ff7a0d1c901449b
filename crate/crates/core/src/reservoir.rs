//! Optoelectronic delay-line reservoir.
//!
//! The reservoir is a bandpass nonlinear oscillator with delayed feedback:
//!
//! ```text
//! tau_L dx/dt = -(1 + tau_L/tau_H) x - y + beta cos^2(kappa x(t - tau) + (pi/4) u(t) + phi0) + noise
//! tau_H dy/dt = x
//! ```
//!
//! `x` is the normalized modulator output, `y` the high-pass integral state,
//! `u(t)` the masked input waveform. Virtual node states are read off the
//! `x` trajectory once per node interval `theta`.
//!
//! The linear part is stiff: with the default constants `dt/tau_L ~ 3.9`, so
//! plain explicit steppers blow up at useful step sizes. The integrator here
//! propagates the 2x2 linear part exactly (matrix exponential) and treats the
//! delayed-feedback drive with an exponential trapezoidal rule plus a
//! Gauss-node correction. The correction reconstructs the delayed trajectory
//! *inside* the step from stored per-step records, which keeps second-order
//! self-convergence even when `dt` exceeds `tau_L`. With `kappa = 0` and
//! constant input the scheme is exact to rounding.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::preprocess::Waveform;

/// How a virtual node state is read from the trajectory of one node interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSampling {
    /// Value of `x` at the end of the interval (default).
    IntervalEnd,
    /// Mean of `x` over the step endpoints inside the interval.
    IntervalMean,
}

impl std::str::FromStr for NodeSampling {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "end" => Ok(NodeSampling::IntervalEnd),
            "mean" => Ok(NodeSampling::IntervalMean),
            other => Err(format!("unknown node sampling '{other}' (expected end|mean)")),
        }
    }
}

/// Physical constants of the delay system plus integration settings.
///
/// Defaults are the numerical-simulation values: 12.5 GHz low-pass and
/// 0.625 MHz high-pass cutoffs, 239.6 ns feedback delay, beta = 1.0,
/// kappa = 0.9, phi0 = -pi/4, 600 nodes at 0.4 ns intervals.
#[derive(Debug, Clone)]
pub struct ReservoirParams {
    /// Low-pass time constant [s].
    pub tau_l: f64,
    /// High-pass time constant [s].
    pub tau_h: f64,
    /// Feedback delay [s].
    pub tau: f64,
    /// Dimensionless gain of the cos^2 drive.
    pub beta: f64,
    /// Dimensionless feedback strength.
    pub kappa: f64,
    /// Modulator bias point [rad].
    pub phi0: f64,
    /// Noise amplitude; per-step std is `noise_sigma * sqrt(dt / tau_l)`.
    pub noise_sigma: f64,
    /// Number of virtual nodes N.
    pub n_nodes: usize,
    /// Node interval theta [s].
    pub theta: f64,
    /// Integration step [s]; must divide theta.
    pub dt: f64,
    pub sampling: NodeSampling,
}

pub const DEFAULT_LOWPASS_CUTOFF_HZ: f64 = 12.5e9;
pub const DEFAULT_HIGHPASS_CUTOFF_HZ: f64 = 0.625e6;

impl Default for ReservoirParams {
    fn default() -> Self {
        let theta = 0.4e-9;
        ReservoirParams {
            tau_l: 1.0 / (2.0 * std::f64::consts::PI * DEFAULT_LOWPASS_CUTOFF_HZ),
            tau_h: 1.0 / (2.0 * std::f64::consts::PI * DEFAULT_HIGHPASS_CUTOFF_HZ),
            tau: 239.6e-9,
            beta: 1.0,
            kappa: 0.9,
            phi0: -0.25 * std::f64::consts::PI,
            noise_sigma: 1e-3,
            n_nodes: 600,
            theta,
            dt: theta / 8.0,
            sampling: NodeSampling::IntervalEnd,
        }
    }
}

impl ReservoirParams {
    /// Mask period T_m = N * theta [s].
    pub fn mask_period(&self) -> f64 {
        self.n_nodes as f64 * self.theta
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_l", self.tau_l),
            ("tau_h", self.tau_h),
            ("tau", self.tau),
            ("theta", self.theta),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("phi0", self.phi0),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if self.n_nodes == 0 {
            return Err(Error::Config("n_nodes must be at least 1".into()));
        }
        let ratio = self.theta / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio < 0.5 {
            return Err(Error::Config(format!(
                "theta/dt must be a positive integer, got {ratio}"
            )));
        }
        if self.tau < self.dt {
            return Err(Error::Config(format!(
                "delay tau ({}) must be at least one step dt ({})",
                self.tau, self.dt
            )));
        }
        Ok(())
    }

    fn steps_per_node(&self) -> usize {
        (self.theta / self.dt).round() as usize
    }
}

/// Length-N vector of virtual node states extracted from one mask period.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeVector(Vec<f64>);

impl NodeVector {
    pub fn zeros(n: usize) -> Self {
        NodeVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for NodeVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for NodeVector {
    fn from(v: Vec<f64>) -> Self {
        NodeVector(v)
    }
}

/// One completed integration step: state at the step start plus the drive
/// values used across it. Enough to reconstruct the trajectory inside the
/// step when it is read back through the delay line.
#[derive(Debug, Clone, Copy, Default)]
struct StepRecord {
    x: f64,
    y: f64,
    g0: f64,
    g1: f64,
}

/// Where and how to evaluate the delayed `x` at one quadrature position.
#[derive(Debug, Clone, Copy)]
struct DelayTap {
    /// Steps back from the current step; 0 means the live state.
    back: usize,
    /// Reconstruction coefficients against (x, y, g0, g1 - g0).
    coeff: [f64; 4],
    /// sigma/dt inside the source step, weighting the endpoint-consistency
    /// correction; 0 for exact start-of-step picks.
    ramp: f64,
}

#[derive(Debug, Clone, Copy)]
struct GaussTap {
    tap: DelayTap,
    /// s_m/dt, position of the node inside the current step.
    lin: f64,
    /// Kernel quadrature weights exp(L (dt - s_m)) col 0, times Gauss weight.
    kx: f64,
    ky: f64,
}

// Gauss-Legendre nodes/weights on [-1, 1], 4 points.
const GAUSS_X: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GAUSS_W: [f64; 4] = [
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
];

/// Precomputed propagator for one step size.
#[derive(Debug, Clone)]
struct Stepper {
    /// exp(L dt), row-major.
    e: [f64; 4],
    /// dt * phi1(L dt) column 0.
    p1: [f64; 2],
    /// dt * phi2(L dt) column 0.
    p2: [f64; 2],
    /// Reconstruction coefficients at sigma = dt (model endpoint).
    end_coeff: [f64; 4],
    tap0: DelayTap,
    tap1: DelayTap,
    gauss: [GaussTap; 4],
}

/// phi_0 = exp, phi_1 = (e^z - 1)/z, phi_2 = (e^z - 1 - z)/z^2,
/// with series fallbacks near z = 0.
fn phi(z: Complex64, k: usize) -> Complex64 {
    if k == 0 {
        return z.exp();
    }
    if z.norm() < 1e-6 {
        return match k {
            1 => Complex64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0,
            _ => Complex64::new(0.5, 0.0) + z / 6.0 + z * z / 24.0,
        };
    }
    let ez = z.exp();
    match k {
        1 => (ez - 1.0) / z,
        _ => (ez - 1.0 - z) / (z * z),
    }
}

/// Linear part of the system and its spectrum.
#[derive(Debug, Clone, Copy)]
struct LinearPart {
    a: f64,
    b: f64,
    c: f64,
    lam1: Complex64,
    lam2: Complex64,
}

impl LinearPart {
    fn new(tau_l: f64, tau_h: f64) -> Result<Self> {
        let a = -(1.0 + tau_l / tau_h) / tau_l;
        let b = -1.0 / tau_l;
        let c = 1.0 / tau_h;
        let disc = Complex64::new(a * a + 4.0 * b * c, 0.0).sqrt();
        let lam1 = (Complex64::new(a, 0.0) - disc) / 2.0;
        // product of the eigenvalues is det L = -b c; avoids cancellation in
        // the slow root
        let lam2 = Complex64::new(-b * c, 0.0) / lam1;
        if (lam1 - lam2).norm() < 1e-9 * lam1.norm().max(1.0) {
            return Err(Error::Config(
                "degenerate filter constants: tau_h too close to 4*tau_l".into(),
            ));
        }
        Ok(LinearPart { a, b, c, lam1, lam2 })
    }

    /// f_k(L t) by Lagrange interpolation on the two eigenvalues.
    fn mat_fn(&self, t: f64, k: usize) -> [f64; 4] {
        let (w1, w2) = (self.lam1 * t, self.lam2 * t);
        let (f1, f2) = (phi(w1, k), phi(w2, k));
        let lt = [self.a * t, self.b * t, self.c * t, 0.0];
        let mut out = [0.0; 4];
        let det = w1 - w2;
        for (i, o) in out.iter_mut().enumerate() {
            let ident = if i % 3 == 0 { 1.0 } else { 0.0 };
            let m1 = Complex64::new(lt[i], 0.0) - w2 * ident;
            let m2 = Complex64::new(lt[i], 0.0) - w1 * ident;
            *o = ((f1 * m1 - f2 * m2) / det).re;
        }
        out
    }

    /// Reconstruction coefficients for x(sigma) inside a recorded step:
    /// x(sigma) = c0 x0 + c1 y0 + c2 g0 + c3 (g1 - g0).
    fn recon_coeff(&self, sigma: f64, dt: f64) -> [f64; 4] {
        if sigma == 0.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let e = self.mat_fn(sigma, 0);
        let f1 = self.mat_fn(sigma, 1);
        let f2 = self.mat_fn(sigma, 2);
        [
            e[0],
            e[1],
            sigma * f1[0],
            sigma * sigma / dt * f2[0],
        ]
    }
}

impl Stepper {
    fn build(params: &ReservoirParams) -> Result<(Self, usize, usize)> {
        let dt = params.dt;
        let lin = LinearPart::new(params.tau_l, params.tau_h)?;
        let e = lin.mat_fn(dt, 0);
        let f1 = lin.mat_fn(dt, 1);
        let f2 = lin.mat_fn(dt, 2);
        let p1 = [dt * f1[0], dt * f1[2]];
        let p2 = [dt * f2[0], dt * f2[2]];
        let end_coeff = [e[0], e[1], p1[0], p2[0]];

        // Split tau/dt into whole steps plus a fractional remainder. The
        // fractional part shifts every delayed read into the preceding
        // recorded step.
        let ratio = params.tau / dt;
        let mut whole = ratio.floor();
        let mut frac = ratio - whole;
        if !(1e-9..=1.0 - 1e-9).contains(&frac) {
            whole = ratio.round();
            frac = 0.0;
        }
        let d = whole as usize;
        let buffer_len = if frac == 0.0 { d + 1 } else { d + 2 };

        // A delayed read at local position p in [0, 1) step units maps to
        // the recorded step `d - shift` back at sigma = (p - frac + shift)*dt.
        let place = |p: f64| -> (usize, f64) {
            let rel = p - frac;
            if rel >= -1e-12 {
                (d, rel.max(0.0) * dt)
            } else {
                (d + 1, (1.0 + rel) * dt)
            }
        };
        let make_tap = |p: f64| -> DelayTap {
            let (mut back, mut sigma) = place(p);
            // a read landing exactly on a step start is the next record's
            // stored x (or the live state)
            if (sigma - dt).abs() < 1e-12 * dt {
                back -= 1;
                sigma = 0.0;
            }
            if back == 0 {
                return DelayTap {
                    back: 0,
                    coeff: [1.0, 0.0, 0.0, 0.0],
                    ramp: 0.0,
                };
            }
            let coeff = lin.recon_coeff(sigma, dt);
            let ramp = if sigma == 0.0 { 0.0 } else { sigma / dt };
            DelayTap { back, coeff, ramp }
        };

        let tap0 = make_tap(0.0);
        let tap1 = make_tap(1.0);
        let mut gauss = [GaussTap {
            tap: tap0,
            lin: 0.0,
            kx: 0.0,
            ky: 0.0,
        }; 4];
        for (g, (xm, wm)) in gauss.iter_mut().zip(GAUSS_X.iter().zip(GAUSS_W.iter())) {
            let s = (xm + 1.0) * dt / 2.0;
            let w = wm * dt / 2.0;
            let kernel = lin.mat_fn(dt - s, 0);
            *g = GaussTap {
                tap: make_tap(s / dt),
                lin: s / dt,
                kx: w * kernel[0],
                ky: w * kernel[2],
            };
        }

        Ok((
            Stepper {
                e,
                p1,
                p2,
                end_coeff,
                tap0,
                tap1,
                gauss,
            },
            d,
            buffer_len,
        ))
    }
}

/// Integrator state: (x, y), the delay-line records, and the noise stream.
pub struct Reservoir {
    params: ReservoirParams,
    stepper: Stepper,
    steps_per_node: usize,
    x: f64,
    y: f64,
    records: Vec<StepRecord>,
    write_index: usize,
    noise_std: f64,
    rng: ChaCha8Rng,
}

impl Reservoir {
    /// Builds a reservoir in the zero state with a seeded noise stream.
    pub fn new(params: ReservoirParams, noise_seed: u64) -> Result<Self> {
        params.validate()?;
        let (stepper, _delay_steps, buffer_len) = Stepper::build(&params)?;
        let noise_std = params.noise_sigma * (params.dt / params.tau_l).sqrt();
        Ok(Reservoir {
            steps_per_node: params.steps_per_node(),
            stepper,
            x: 0.0,
            y: 0.0,
            records: vec![StepRecord::default(); buffer_len],
            write_index: 0,
            noise_std,
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
            params,
        })
    }

    pub fn params(&self) -> &ReservoirParams {
        &self.params
    }

    /// Ring buffer length: round(tau/dt) + 1 when tau/dt is integral.
    pub fn buffer_len(&self) -> usize {
        self.records.len()
    }

    pub fn state(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Overwrites (x, y) without touching the delay records; used to plant
    /// perturbations for free-run experiments.
    pub fn set_state(&mut self, x: f64, y: f64) {
        self.x = x;
        self.y = y;
    }

    /// Zeroes x, y and the delay records. The noise stream is untouched.
    pub fn reset_state(&mut self) {
        self.x = 0.0;
        self.y = 0.0;
        self.records.fill(StepRecord::default());
        self.write_index = 0;
    }

    fn record(&self, back: usize) -> &StepRecord {
        let n = self.records.len();
        &self.records[(self.write_index + n - back) % n]
    }

    /// Delayed x at one tap, reconstructing inside the recorded step and
    /// pinning the reconstruction to the next record's stored endpoint.
    fn tap_x(&self, tap: &DelayTap) -> f64 {
        if tap.back == 0 {
            return self.x;
        }
        let rec = self.record(tap.back);
        let dg = rec.g1 - rec.g0;
        let c = &tap.coeff;
        let base = c[0] * rec.x + c[1] * rec.y + c[2] * rec.g0 + c[3] * dg;
        if tap.ramp == 0.0 {
            return base;
        }
        let next_x = if tap.back == 1 {
            self.x
        } else {
            self.record(tap.back - 1).x
        };
        let ec = &self.stepper.end_coeff;
        let model_end = ec[0] * rec.x + ec[1] * rec.y + ec[2] * rec.g0 + ec[3] * dg;
        base + (next_x - model_end) * tap.ramp
    }

    /// Advances the state by one step of `dt` with the input held at `u`.
    pub fn step(&mut self, u: f64) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Config(format!("non-finite input sample u = {u}")));
        }
        let p = &self.params;
        let st = &self.stepper;
        let arg = FRAC_PI_4 * u + p.phi0;
        let drive = |xd: f64| -> f64 { p.beta * (p.kappa * xd + arg).cos().powi(2) / p.tau_l };

        let g0 = drive(self.tap_x(&st.tap0));
        let g1 = drive(self.tap_x(&st.tap1));
        let dg = g1 - g0;

        let mut acc_x = 0.0;
        let mut acc_y = 0.0;
        for gt in &st.gauss {
            let r = drive(self.tap_x(&gt.tap)) - (g0 + gt.lin * dg);
            acc_x += gt.kx * r;
            acc_y += gt.ky * r;
        }

        let e = &st.e;
        let mut x_new = e[0] * self.x + e[1] * self.y + st.p1[0] * g0 + st.p2[0] * dg + acc_x;
        let y_new = e[2] * self.x + e[3] * self.y + st.p1[1] * g0 + st.p2[1] * dg + acc_y;
        if self.noise_std > 0.0 {
            let n: f64 = self.rng.sample(StandardNormal);
            x_new += self.noise_std * n;
        }
        if !x_new.is_finite() || !y_new.is_finite() {
            return Err(Error::Divergence(format!(
                "reservoir state non-finite after step: x = {x_new}, y = {y_new} (u = {u})"
            )));
        }

        self.records[self.write_index] = StepRecord {
            x: self.x,
            y: self.y,
            g0,
            g1,
        };
        self.write_index = (self.write_index + 1) % self.records.len();
        self.x = x_new;
        self.y = y_new;
        Ok(())
    }

    /// Integrates one mask period T_m = N*theta, holding the input at
    /// `waveform` value i during node interval i, and returns the node states.
    /// The reservoir keeps its final state, so successive calls run the
    /// dynamics continuously.
    pub fn drive(&mut self, waveform: &Waveform) -> Result<NodeVector> {
        let n = self.params.n_nodes;
        if waveform.len() != n {
            return Err(Error::Dimension(format!(
                "waveform has {} node intervals, reservoir expects {n}",
                waveform.len()
            )));
        }
        if (waveform.theta() - self.params.theta).abs() > 1e-12 * self.params.theta {
            return Err(Error::Dimension(format!(
                "waveform node interval {} does not match reservoir theta {}",
                waveform.theta(),
                self.params.theta
            )));
        }
        let spn = self.steps_per_node;
        let mut values = Vec::with_capacity(n);
        for &u in waveform.node_values() {
            match self.params.sampling {
                NodeSampling::IntervalEnd => {
                    for _ in 0..spn {
                        self.step(u)?;
                    }
                    values.push(self.x);
                }
                NodeSampling::IntervalMean => {
                    let mut sum = 0.0;
                    for _ in 0..spn {
                        self.step(u)?;
                        sum += self.x;
                    }
                    values.push(sum / spn as f64);
                }
            }
        }
        Ok(NodeVector(values))
    }

    /// Runs the autonomous system (u = 0) for `duration` seconds, sampling
    /// x every `sample_every` seconds (rounded to whole steps).
    pub fn free_run(&mut self, duration: f64, sample_every: f64) -> Result<Vec<f64>> {
        if duration < 0.0 || !duration.is_finite() {
            return Err(Error::Config(format!("duration must be >= 0, got {duration}")));
        }
        if !sample_every.is_finite() || sample_every <= 0.0 {
            return Err(Error::Config(format!(
                "sample_every must be positive, got {sample_every}"
            )));
        }
        let steps = (duration / self.params.dt).round() as usize;
        let stride = ((sample_every / self.params.dt).round() as usize).max(1);
        let mut out = Vec::with_capacity(steps / stride + 1);
        for i in 1..=steps {
            self.step(0.0)?;
            if i % stride == 0 {
                out.push(self.x);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::build_waveform;

    fn quiet(params: &mut ReservoirParams) {
        params.noise_sigma = 0.0;
    }

    #[test]
    fn buffer_length_matches_delay_at_defaults() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        let r = Reservoir::new(p, 7).unwrap();
        assert_eq!(r.buffer_len(), 4793);
        assert_eq!(r.state(), (0.0, 0.0));
    }

    #[test]
    fn rejects_non_divisible_step() {
        let base = ReservoirParams::default();
        let p = ReservoirParams {
            dt: base.theta / 8.3,
            ..base
        };
        assert!(matches!(Reservoir::new(p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_zero_nodes() {
        let p = ReservoirParams {
            n_nodes: 0,
            ..Default::default()
        };
        assert!(matches!(Reservoir::new(p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let p = ReservoirParams::default();
        let mut a = Reservoir::new(p.clone(), 11).unwrap();
        let mut b = Reservoir::new(p, 11).unwrap();
        for _ in 0..500 {
            a.step(0.3).unwrap();
            b.step(0.3).unwrap();
        }
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn zero_gain_is_a_fixed_point() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.beta = 0.0;
        let mut r = Reservoir::new(p, 0).unwrap();
        for _ in 0..200 {
            r.step(1.7).unwrap();
        }
        assert_eq!(r.state(), (0.0, 0.0));
    }

    // Exact solution of the linear system with constant drive
    // G = cos^2(-pi/4)/tau_L from the zero state, one default step
    // (kappa = 0 makes the scheme exact): values computed with 50-digit
    // arithmetic from w(dt) = dt phi1(L dt) (G, 0).
    #[test]
    fn single_step_matches_closed_form() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.kappa = 0.0;
        p.phi0 = -std::f64::consts::FRAC_PI_4;
        let mut r = Reservoir::new(p, 0).unwrap();
        r.step(0.0).unwrap();
        let (x, y) = r.state();
        let x_exact = 0.4900749021190275;
        let y_exact = 7.366138766397507e-5;
        assert!((x - x_exact).abs() <= 1e-10 * x_exact.abs(), "x = {x}");
        assert!((y - y_exact).abs() <= 1e-10 * y_exact.abs(), "y = {y}");
    }

    // In the non-stiff regime (dt << tau_L) one step from zero is
    // dt * beta cos^2(phi0) / tau_L to leading order.
    #[test]
    fn single_step_leading_order_when_not_stiff() {
        let p = ReservoirParams {
            tau_l: 1.0,
            tau_h: 1e4,
            tau: 0.1,
            beta: 1.0,
            kappa: 0.0,
            phi0: -std::f64::consts::FRAC_PI_4,
            noise_sigma: 0.0,
            n_nodes: 4,
            theta: 8e-3,
            dt: 1e-3,
            sampling: NodeSampling::IntervalEnd,
        };
        let mut r = Reservoir::new(p, 0).unwrap();
        r.step(0.0).unwrap();
        let expected = 1e-3 * 0.5 / 1.0;
        let (x, _) = r.state();
        assert!(
            (x - expected).abs() <= 1e-3 * expected,
            "x = {x}, leading order {expected}"
        );
    }

    #[test]
    fn reset_reproduces_fresh_step() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.kappa = 0.0;
        p.phi0 = -std::f64::consts::FRAC_PI_4;
        let mut r = Reservoir::new(p, 0).unwrap();
        for _ in 0..100 {
            r.step(0.9).unwrap();
        }
        r.reset_state();
        r.step(0.0).unwrap();
        let (x, _) = r.state();
        assert!((x - 0.4900749021190275).abs() <= 1e-10);
        r.reset_state();
        r.reset_state();
        assert_eq!(r.state(), (0.0, 0.0));
    }

    #[test]
    fn drive_rejects_wrong_length() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.n_nodes = 8;
        let theta = p.theta;
        let mut r = Reservoir::new(p, 0).unwrap();
        let wf = build_waveform(vec![0.0; 5], theta);
        assert!(matches!(r.drive(&wf), Err(Error::Dimension(_))));
    }

    #[test]
    fn drive_is_deterministic_without_noise() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.n_nodes = 32;
        let theta = p.theta;
        let input: Vec<f64> = (0..32).map(|i| ((i * 37 % 17) as f64 / 8.5) - 1.0).collect();
        let wf = build_waveform(input, theta);
        let mut a = Reservoir::new(p.clone(), 1).unwrap();
        let mut b = Reservoir::new(p, 2).unwrap();
        let va = a.drive(&wf).unwrap();
        let vb = b.drive(&wf).unwrap();
        assert_eq!(&*va, &*vb);
        assert!(va.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn beta_zero_drive_gives_zero_nodes() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.beta = 0.0;
        p.n_nodes = 16;
        let theta = p.theta;
        let mut r = Reservoir::new(p, 0).unwrap();
        let wf = build_waveform(vec![0.7; 16], theta);
        let v = r.drive(&wf).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sampling_modes_differ() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.n_nodes = 8;
        let theta = p.theta;
        let input: Vec<f64> = (0..8).map(|i| (i as f64 - 4.0) / 4.0).collect();
        let wf = build_waveform(input, theta);
        let mut end = Reservoir::new(p.clone(), 0).unwrap();
        p.sampling = NodeSampling::IntervalMean;
        let mut mean = Reservoir::new(p, 0).unwrap();
        let ve = end.drive(&wf).unwrap();
        let vm = mean.drive(&wf).unwrap();
        assert_ne!(&*ve, &*vm);
    }

    // With kappa = 0 and a constant input the drive is piecewise constant in
    // time, which the propagator integrates exactly; a 10x finer step is the
    // reference.
    #[test]
    fn feedback_free_drive_matches_high_resolution_reference() {
        let run = |divisor: f64| -> NodeVector {
            let mut p = ReservoirParams::default();
            quiet(&mut p);
            p.kappa = 0.0;
            p.dt = p.theta / divisor;
            let theta = p.theta;
            let n = p.n_nodes;
            let mut r = Reservoir::new(p, 0).unwrap();
            r.drive(&build_waveform(vec![0.3; n], theta)).unwrap()
        };
        let coarse = run(8.0);
        let fine = run(80.0);
        let num: f64 = coarse.iter().zip(fine.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = fine.iter().map(|b| b * b).sum();
        let rel_rms = (num / den).sqrt();
        assert!(rel_rms < 1e-3, "rel RMS {rel_rms}");
    }

    // tau/dt need not be integral; the delayed reads then interpolate into
    // the preceding step record.
    #[test]
    fn fractional_delay_ratio_is_supported() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.n_nodes = 16;
        p.tau = 239.62e-9; // tau/dt = 4792.4
        let theta = p.theta;
        let mut r = Reservoir::new(p, 0).unwrap();
        assert_eq!(r.buffer_len(), 4794);
        let mut p2 = ReservoirParams::default();
        quiet(&mut p2);
        p2.n_nodes = 16;
        p2.tau = 239.6e-9;
        let mut r2 = Reservoir::new(p2, 0).unwrap();
        // the delay spans ~37 of these short mask periods, so run long
        // enough for the feedback loop to engage
        let wf = build_waveform((0..16).map(|i| (i as f64) / 8.0 - 1.0).collect(), theta);
        let mut last = (NodeVector::zeros(16), NodeVector::zeros(16));
        for _ in 0..80 {
            last = (r.drive(&wf).unwrap(), r2.drive(&wf).unwrap());
        }
        assert!(last.0.iter().all(|x| x.is_finite()));
        // a 0.02 ns delay offset barely moves the settled node values
        for (a, b) in last.0.iter().zip(last.1.iter()) {
            assert!((a - b).abs() < 0.2, "{a} vs {b}");
        }
    }

    #[test]
    fn free_run_zero_duration_is_empty() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        let mut r = Reservoir::new(p, 0).unwrap();
        let traj = r.free_run(0.0, 1e-9).unwrap();
        assert!(traj.is_empty());
    }

    #[test]
    fn free_run_decays_at_sub_unity_feedback() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        let tau = p.tau;
        let theta = p.theta;
        let y_eq = p.beta * p.phi0.cos().powi(2);
        let mut r = Reservoir::new(p, 0).unwrap();
        r.set_state(1e-3, y_eq);
        let early: Vec<f64> = r.free_run(5.0 * tau, theta).unwrap();
        let late: Vec<f64> = r.free_run(45.0 * tau, theta).unwrap();
        let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let tail = &late[late.len() - late.len() / 9..];
        assert!(peak(tail) < 1e-2 * peak(&early), "no decay: {} vs {}", peak(tail), peak(&early));
    }

    #[test]
    fn free_run_oscillates_past_unity_feedback() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.kappa = 1.3;
        let tau = p.tau;
        let theta = p.theta;
        let y_eq = p.beta * p.phi0.cos().powi(2);
        let mut r = Reservoir::new(p, 0).unwrap();
        r.set_state(1e-3, y_eq);
        r.free_run(30.0 * tau, tau).unwrap();
        let traj = r.free_run(5.0 * tau, theta).unwrap();
        let max = traj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = traj.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max - min > 1e-3, "peak-to-peak {}", max - min);
    }

    // With kappa = 0 the delay line is disconnected, so two reservoirs with
    // different histories forget them after the high-pass state relaxes
    // under a common drive.
    #[test]
    fn feedback_free_reservoir_is_memoryless() {
        let mut p = ReservoirParams::default();
        quiet(&mut p);
        p.kappa = 0.0;
        p.n_nodes = 32;
        let theta = p.theta;
        let mut a = Reservoir::new(p.clone(), 0).unwrap();
        let mut b = Reservoir::new(p.clone(), 0).unwrap();
        // distinct histories
        let wf_a = build_waveform(vec![1.5; 32], theta);
        let wf_b = build_waveform(vec![-1.5; 32], theta);
        for _ in 0..4 {
            a.drive(&wf_a).unwrap();
            b.drive(&wf_b).unwrap();
        }
        // identical drive for ~60 tau (mask period here is 32 theta)
        let flush = build_waveform(vec![0.2; 32], theta);
        let flush_periods = (60.0 * p.tau / (32.0 * theta)).ceil() as usize;
        for _ in 0..flush_periods {
            a.drive(&flush).unwrap();
            b.drive(&flush).unwrap();
        }
        let probe = build_waveform((0..32).map(|i| (i as f64) / 16.0 - 1.0).collect(), theta);
        let va = a.drive(&probe).unwrap();
        let vb = b.drive(&probe).unwrap();
        for (x, y) in va.iter().zip(vb.iter()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    // Bounded drive keeps the state bounded: beta <= 1.5, |u| <= 2,
    // one million steps across a few parameter draws.
    #[test]
    fn state_stays_bounded_under_bounded_drive() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..3 {
            let mut p = ReservoirParams::default();
            quiet(&mut p);
            p.beta = rng.gen_range(0.5..=1.5);
            p.kappa = rng.gen_range(0.0..=1.5);
            let mut r = Reservoir::new(p, 0).unwrap();
            let mut u = 0.0;
            for i in 0..1_000_000usize {
                if i % 8 == 0 {
                    u = rng.gen_range(-2.0..=2.0);
                }
                r.step(u).unwrap();
                let (x, _) = r.state();
                assert!(x.abs() < 10.0, "|x| = {} at step {i}", x.abs());
            }
        }
    }
}
