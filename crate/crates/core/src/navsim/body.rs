//! Planar body integrator driven by the shared footstep controller.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::grid::OccupancyGrid;
use super::profile::RobotProfile;

/// Duration of one physical robot step (s).
pub const STEP_DT: f64 = 0.25;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootTarget {
    pub x_des: f64,
    pub y_des: f64,
    pub gamma_des: f64,
}

/// Desired swing-foot placement realising `(v_des, ω_des)` over one step.
///
/// The body advances `v_des·dt` along its heading while the foot swings on a
/// circle of radius `r_f` from angle `γ_cur` to `γ_cur + ω_des·dt`.
pub fn footstep_target(
    foot_pos: (f64, f64),
    gamma_cur: f64,
    v_des: f64,
    omega_des: f64,
    r_f: f64,
    dt: f64,
) -> FootTarget {
    let dx_com = v_des * dt;
    let dgamma = omega_des * dt;
    let gamma_des = gamma_cur + dgamma;
    // Half-angle products rather than cosine differences: exactly zero at
    // ω = 0 regardless of how libm rounds the two endpoints.
    let chord = 2.0 * r_f * (0.5 * dgamma).sin();
    let mid = gamma_cur + 0.5 * dgamma;
    let dx_f = dx_com - chord * mid.sin();
    let dy_f = chord * mid.cos();
    FootTarget {
        x_des: foot_pos.0 + dx_f,
        y_des: foot_pos.1 + dy_f,
        gamma_des,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyState {
    pub x: f64,
    pub y: f64,
    /// Wrapped to (−π, π].
    pub heading: f64,
    /// Tracked forward velocity (m/s).
    pub lin_vel: f64,
    /// Tracked yaw rate (rad/s), excluding drift.
    pub ang_vel: f64,
    /// Last clipped yaw-rate command, used for the jump hazard.
    pub last_omega_cmd: f64,
    /// Foot angle relative to the heading, per leg.
    pub foot_angles: Vec<f64>,
    pub path_length_accum: f64,
    pub step_index: usize,
}

impl BodyState {
    pub fn new(x: f64, y: f64, heading: f64, num_legs: usize) -> Self {
        let foot_angles = (0..num_legs)
            .map(|k| wrap_angle(2.0 * PI * (k as f64 + 0.5) / num_legs as f64))
            .collect();
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            lin_vel: 0.0,
            ang_vel: 0.0,
            last_omega_cmd: 0.0,
            foot_angles,
            path_length_accum: 0.0,
            step_index: 0,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEvents {
    pub fell: bool,
    pub collided: bool,
    /// Probability of falling that was applied this step.
    pub fall_probability: f64,
}

/// Per-step fall hazard for a clipped command and yaw-rate jump.
pub fn fall_probability(profile: &RobotProfile, v_cmd: f64, omega_jump: f64) -> f64 {
    let p = profile.fall_gain * (v_cmd.abs() - profile.fall_v_crit).max(0.0)
        + profile.fall_gain * (omega_jump.abs() - profile.fall_omega_crit).max(0.0);
    p.clamp(0.0, 1.0)
}

/// Advances the body by one robot step.
///
/// Commands are clipped to the profile limits, tracked through a first-order
/// lag, integrated along the (drifting) heading and perturbed by slip. A step
/// that would make the body disc overlap an occupied cell is undone and
/// reported as a collision.
pub fn body_step(
    state: &BodyState,
    v_des: f64,
    omega_des: f64,
    profile: &RobotProfile,
    grid: &OccupancyGrid,
    rng: &mut dyn RngCore,
) -> (BodyState, StepEvents) {
    let dt = STEP_DT;
    let v_cmd = if v_des.is_finite() { v_des.clamp(-profile.v_max, profile.v_max) } else { 0.0 };
    let omega_cmd = if omega_des.is_finite() {
        omega_des.clamp(-profile.omega_max, profile.omega_max)
    } else {
        0.0
    };

    let blend = if profile.lag_tau > 0.0 {
        1.0 - (-dt / profile.lag_tau).exp()
    } else {
        1.0
    };
    let lin_vel = state.lin_vel + (v_cmd - state.lin_vel) * blend;
    let ang_vel = state.ang_vel + (omega_cmd - state.ang_vel) * blend;

    let yaw_rate = ang_vel + profile.turn_bias;
    let heading_mid = state.heading + 0.5 * yaw_rate * dt;
    let heading = wrap_angle(state.heading + yaw_rate * dt);

    let mut x = state.x + lin_vel * dt * heading_mid.cos();
    let mut y = state.y + lin_vel * dt * heading_mid.sin();
    if profile.slip_std > 0.0 {
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        x += profile.slip_std * nx;
        y += profile.slip_std * ny;
    }

    let mut events = StepEvents::default();
    let mut lin_vel = lin_vel;
    if grid.disc_collides(x, y, profile.body_radius) {
        x = state.x;
        y = state.y;
        lin_vel = 0.0;
        events.collided = true;
    }

    let p_fall = fall_probability(profile, v_cmd, omega_cmd - state.last_omega_cmd);
    events.fall_probability = p_fall;
    if p_fall > 0.0 {
        events.fell = rng.random::<f64>() < p_fall;
    }

    let foot_angles = state
        .foot_angles
        .iter()
        .map(|&g| {
            let foot = (profile.r_f * g.cos(), profile.r_f * g.sin());
            wrap_angle(footstep_target(foot, g, v_cmd, omega_cmd, profile.r_f, dt).gamma_des)
        })
        .collect();

    let moved = ((x - state.x).powi(2) + (y - state.y).powi(2)).sqrt();
    let next = BodyState {
        x,
        y,
        heading,
        lin_vel,
        ang_vel,
        last_omega_cmd: omega_cmd,
        foot_angles,
        path_length_accum: state.path_length_accum + moved,
        step_index: state.step_index + 1,
    };
    (next, events)
}
