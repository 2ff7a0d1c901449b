//! Reinforcement learning on a simulated optoelectronic delay-line
//! reservoir.
//!
//! A bandpass nonlinear delay oscillator, driven by masked task states,
//! produces time-multiplexed virtual-node responses. A linear readout over
//! those node states approximates the action-value function and is trained
//! with Q-learning plus experience replay on from-scratch CartPole and
//! MountainCar environments.
//!
//! The [`harness`] module ties everything together (training runs, parameter
//! sweeps, fixed-weight evaluation, CSV logs, weight files) and backs the
//! `photonrl` binary.

pub mod agent;
pub mod envs;
pub mod error;
pub mod harness;
pub mod preprocess;
pub mod reservoir;

pub use error::{Error, Result};
