//! Parameterised cart-pole family.
//!
//! The pole is a uniform rod of length `pole_length` hinged on the cart. Its
//! centre of mass sits `pole_length / 2` along the rod and is displaced
//! `pole_offset` perpendicular to it, which adds a gravity torque
//! `m_pole·g·offset·cos θ` and tilts the balance pose away from θ = 0. The
//! failure band applies to the tilt of the centre of mass, so every member of
//! the family has a reachable balance pose, but each one sits at a different
//! rod angle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvStep};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const POLE_MASS: f64 = 0.1;
pub const FORCE_MAX: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const EPISODE_STEPS: usize = 200;
pub const ANGLE_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const X_LIMIT: f64 = 2.4;
pub const INIT_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    /// Cart mass (kg).
    pub mass: f64,
    /// Pole length (m).
    pub pole_length: f64,
    /// Perpendicular displacement of the pole's centre of mass (m).
    pub pole_offset: f64,
}

impl CartPoleParams {
    pub fn new(mass: f64, pole_length: f64, pole_offset: f64) -> Result<Self> {
        let p = Self {
            mass,
            pole_length,
            pole_offset,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.mass.is_finite() && self.pole_length.is_finite() && self.pole_offset.is_finite();
        if !finite || self.mass <= 0.0 || self.pole_length <= 0.0 || self.pole_offset.abs() >= self.pole_length {
            return Err(Error::Config(format!("invalid cart-pole parameters {self:?}")));
        }
        Ok(())
    }

    /// Rod angle at which the centre of mass is directly above the hinge.
    pub fn balance_angle(&self) -> f64 {
        -self.pole_offset.atan2(0.5 * self.pole_length)
    }

    /// Tilt of the centre of mass from vertical for rod angle `theta`.
    pub fn com_tilt(&self, theta: f64) -> f64 {
        theta - self.balance_angle()
    }
}

/// The five cart-poles of the family: three for training, two held out.
pub fn family_member(name: &str) -> Option<CartPoleParams> {
    let (mass, pole_length, pole_offset) = match name.to_ascii_lowercase().as_str() {
        "cp1" => (0.1, 0.5, 0.0),
        "cp2" => (1.0, 1.0, 0.15),
        "cp3" => (2.0, 1.5, -0.15),
        "cp4" => (1.5, 0.75, -0.1),
        "cp5" => (1.5, 1.25, -0.1),
        _ => return None,
    };
    Some(CartPoleParams {
        mass,
        pole_length,
        pole_offset,
    })
}

pub const FAMILY: [&str; 5] = ["cp1", "cp2", "cp3", "cp4", "cp5"];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub step_index: usize,
}

impl CartPoleState {
    fn as_array(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Time derivative of `[x, ẋ, θ, θ̇]` under horizontal force `force`.
pub fn derivative(params: &CartPoleParams, s: [f64; 4], force: f64) -> [f64; 4] {
    let [_, x_dot, theta, theta_dot] = s;
    let m = POLE_MASS;
    let half = 0.5 * params.pole_length;
    let d = params.pole_offset;
    let (sin, cos) = theta.sin_cos();
    // horizontal and vertical lever arms of the centre of mass
    let lever_x = half * sin + d * cos;
    let lever_y = half * cos - d * sin;
    let inertia = m * (half * half + d * d) + m * params.pole_length * params.pole_length / 12.0;
    let a11 = params.mass + m;
    let a12 = m * lever_y;
    let a22 = inertia;
    let b1 = force + m * lever_x * theta_dot * theta_dot;
    let b2 = m * GRAVITY * lever_x;
    let det = a11 * a22 - a12 * a12;
    let x_acc = (b1 * a22 - a12 * b2) / det;
    let theta_acc = (a11 * b2 - a12 * b1) / det;
    [x_dot, x_acc, theta_dot, theta_acc]
}

/// One classical RK4 step of length `dt`.
pub fn rk4(params: &CartPoleParams, s: [f64; 4], force: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]];
    let k1 = derivative(params, s, force);
    let k2 = derivative(params, add(s, k1, 0.5 * dt), force);
    let k3 = derivative(params, add(s, k2, 0.5 * dt), force);
    let k4 = derivative(params, add(s, k3, dt), force);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Pure dynamics step. Reward is `1/EPISODE_STEPS` for every step that ends
/// inside the failure band, so a full episode sums to 1.
pub fn cartpole_step(params: &CartPoleParams, state: &CartPoleState, force: f64) -> (CartPoleState, f64, bool) {
    let force = force.clamp(-FORCE_MAX, FORCE_MAX);
    let [x, x_dot, theta, theta_dot] = rk4(params, state.as_array(), force, DT);
    let next = CartPoleState {
        x,
        x_dot,
        theta,
        theta_dot,
        step_index: state.step_index + 1,
    };
    let failed = !next.is_finite() || x.abs() > X_LIMIT || params.com_tilt(theta).abs() > ANGLE_LIMIT;
    let reward = if failed { 0.0 } else { 1.0 / EPISODE_STEPS as f64 };
    let done = failed || next.step_index >= EPISODE_STEPS;
    (next, reward, done)
}

#[derive(Debug, Clone)]
pub struct CartPoleEnv {
    params: CartPoleParams,
    state: CartPoleState,
    done: bool,
}

impl CartPoleEnv {
    pub fn new(params: CartPoleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: CartPoleState::default(),
            done: true,
        })
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn state(&self) -> &CartPoleState {
        &self.state
    }

    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.done = false;
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        vec![s.x, s.x_dot, s.theta.sin(), s.theta.cos(), s.theta_dot]
    }
}

/// Builds a cart-pole environment; the seed only matters through the RNG
/// passed to [`Env::reset`].
pub fn make_cartpole(params: CartPoleParams) -> Result<CartPoleEnv> {
    CartPoleEnv::new(params)
}

impl Env for CartPoleEnv {
    fn obs_dim(&self) -> usize {
        5
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let mut u = || rng.random_range(-INIT_SPREAD..INIT_SPREAD);
        self.state = CartPoleState {
            x: u(),
            x_dot: u(),
            theta: self.params.balance_angle() + u(),
            theta_dot: u(),
            step_index: 0,
        };
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn rand::RngCore) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Contract("stepping a finished cart-pole episode".into()));
        }
        let force = action[0].clamp(-1.0, 1.0) * FORCE_MAX;
        let (next, reward, done) = cartpole_step(&self.params, &self.state, force);
        self.state = next;
        self.done = done;
        // reward is zero exactly on failure
        let terminal = reward == 0.0;
        Ok(EnvStep {
            obs: self.observation(),
            reward,
            done,
            terminal,
            success: done && !terminal,
            path_length: 0.0,
            shortest_path: 0.0,
        })
    }
}
