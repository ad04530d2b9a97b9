use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dynamics descriptor of one legged platform as seen by the planar simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotProfile {
    pub name: String,
    /// Collision radius of the body (m).
    pub body_radius: f64,
    /// Foot to centre-of-mass distance (m).
    pub r_f: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// First-order velocity tracking time constant (s); 0 tracks instantly.
    pub lag_tau: f64,
    /// Systematic yaw drift (rad/s), positive turns left.
    pub turn_bias: f64,
    /// Per-step Gaussian position noise (m).
    pub slip_std: f64,
    pub fall_v_crit: f64,
    pub fall_omega_crit: f64,
    pub fall_gain: f64,
    pub num_legs: usize,
    pub mass: f64,
    pub leg_length: f64,
}

impl RobotProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_radius", self.body_radius),
            ("r_f", self.r_f),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("fall_v_crit", self.fall_v_crit),
            ("fall_omega_crit", self.fall_omega_crit),
            ("mass", self.mass),
            ("leg_length", self.leg_length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("profile `{}`: {name} must be positive", self.name)));
            }
        }
        let non_negative = [
            ("lag_tau", self.lag_tau),
            ("slip_std", self.slip_std),
            ("fall_gain", self.fall_gain),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("profile `{}`: {name} must be non-negative", self.name)));
            }
        }
        if !self.turn_bias.is_finite() {
            return Err(Error::Config(format!("profile `{}`: turn_bias must be finite", self.name)));
        }
        if self.r_f >= 2.0 * self.body_radius {
            return Err(Error::Config(format!("profile `{}`: r_f must be < 2·body_radius", self.name)));
        }
        if !matches!(self.num_legs, 4 | 6) {
            return Err(Error::Config(format!("profile `{}`: num_legs must be 4 or 6", self.name)));
        }
        Ok(())
    }

    /// Point-like agent that tracks commands perfectly and never falls.
    pub fn idealized() -> Self {
        Self {
            name: "ideal".into(),
            body_radius: 0.15,
            r_f: 0.15,
            v_max: 0.5,
            omega_max: 1.0,
            lag_tau: 0.0,
            turn_bias: 0.0,
            slip_std: 0.0,
            fall_v_crit: 10.0,
            fall_omega_crit: 10.0,
            fall_gain: 0.0,
            num_legs: 4,
            mass: 1.0,
            leg_length: 0.4,
        }
    }

    /// Built-in profiles: `a1`, `aliengo`, `daisy` (training set),
    /// `laikago`, `daisy4` (held out) and `ideal`.
    ///
    /// Mass, leg length and leg count are the platforms' published values; the
    /// remaining dynamics constants are hand-picked stand-ins.
    pub fn builtin(name: &str) -> Option<Self> {
        #[rustfmt::skip]
        let (body_radius, r_f, lag_tau, turn_bias, slip_std, fall_v_crit, fall_omega_crit, num_legs, mass, leg_length) =
            match name.to_ascii_lowercase().as_str() {
                "a1" =>      (0.15, 0.18, 0.10,  0.00, 0.005, 0.45, 1.2, 4, 12.46, 0.40),
                "aliengo" => (0.22, 0.25, 0.25, -0.04, 0.010, 0.40, 1.0, 4, 20.64, 0.50),
                "daisy" =>   (0.36, 0.30, 0.40,  0.12, 0.015, 0.30, 0.8, 6, 24.76, 0.45),
                "laikago" => (0.25, 0.26, 0.30,  0.03, 0.010, 0.38, 1.0, 4, 20.74, 0.50),
                "daisy4" =>  (0.30, 0.30, 0.60,  0.15, 0.020, 0.28, 0.7, 4, 17.62, 0.54),
                "ideal" => return Some(Self::idealized()),
                _ => return None,
            };
        Some(Self {
            name: name.to_ascii_lowercase(),
            body_radius,
            r_f,
            v_max: 0.5,
            omega_max: 1.0,
            lag_tau,
            turn_bias,
            slip_std,
            fall_v_crit,
            fall_omega_crit,
            fall_gain: 0.5,
            num_legs,
            mass,
            leg_length,
        })
    }
}

pub const TRAIN_ROBOTS: [&str; 3] = ["a1", "aliengo", "daisy"];
pub const TEST_ROBOTS: [&str; 2] = ["laikago", "daisy4"];
