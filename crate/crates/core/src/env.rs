//! Common interface over the cart-pole and navigation environments.

use rand::RngCore;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Episode over (terminal or time limit).
    pub done: bool,
    /// Episode ended by a failure state; value bootstrapping stops here.
    pub terminal: bool,
    pub success: bool,
    /// Distance travelled so far (m); zero where meaningless.
    pub path_length: f64,
    /// Shortest-path length from the episode start (m); zero where meaningless.
    pub shortest_path: f64,
}

/// An episodic environment with continuous actions in `[-1, 1]^act_dim`.
pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<EnvStep>;
}
