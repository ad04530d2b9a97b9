//! Tanh-squashed diagonal Gaussian used by the actor.

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::Mat;
use super::tape::{softplus, Tape, Var};
use crate::error::Result;

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Maps an unbounded network output smoothly into `[LOG_STD_MIN, LOG_STD_MAX]`.
pub fn squash_log_std(raw: f64) -> f64 {
    LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
}

pub fn squash_log_std_tape(tape: &mut Tape, raw: Var) -> Var {
    let t = tape.tanh(raw);
    let t = tape.add_scalar(t, 1.0);
    let t = tape.scale(t, 0.5 * (LOG_STD_MAX - LOG_STD_MIN));
    tape.add_scalar(t, LOG_STD_MIN)
}

/// `ln(1 − tanh²(u))`, stable for large |u|.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Log-density of `tanh(u)` where `u ~ N(mean, exp(log_std)²)`, per dimension summed.
pub fn squashed_log_prob(pre_tanh: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    pre_tanh
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&u, &m), &ls)| {
            let ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI - log_one_minus_tanh_sq(u)
        })
        .sum()
}

/// Draws `tanh(mean + std·ε)` and its log-probability. `log_std` is clamped
/// to `[LOG_STD_MIN, LOG_STD_MAX]` first.
pub fn gaussian_policy_sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let mut action = Vec::with_capacity(mean.len());
    let mut log_prob = 0.0;
    for (&m, &ls) in mean.iter().zip(log_std) {
        let ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let eps: f64 = rng.sample(StandardNormal);
        let u = m + ls.exp() * eps;
        action.push(u.tanh());
        log_prob += -0.5 * eps * eps - ls - HALF_LN_2PI - log_one_minus_tanh_sq(u);
    }
    (action, log_prob)
}

/// Reparameterised sample on the tape. `noise` holds standard-normal draws with
/// the same shape as `mean`. Returns the squashed action (n×d) and log-prob (n×1).
pub fn gaussian_sample_tape(tape: &mut Tape, mean: Var, log_std: Var, noise: Mat) -> Result<(Var, Var)> {
    let gauss_const = noise.mapv(|e| -0.5 * e * e - HALF_LN_2PI);
    let noise = tape.constant(noise);
    let std = tape.exp(log_std);
    let spread = tape.mul(std, noise)?;
    let u = tape.add(mean, spread)?;
    let action = tape.tanh(u);

    // ln(1 − tanh²u) = 2(ln2 − u − softplus(−2u))
    let neg2u = tape.scale(u, -2.0);
    let sp = tape.softplus(neg2u);
    let u_plus_sp = tape.add(u, sp)?;
    let corr = tape.scale(u_plus_sp, -2.0);
    let corr = tape.add_scalar(corr, 2.0 * std::f64::consts::LN_2);

    let gauss_const = tape.constant(gauss_const);
    let gauss = tape.sub(gauss_const, log_std)?;
    let per_dim = tape.sub(gauss, corr)?;
    let log_prob = tape.sum_cols(per_dim);
    Ok((action, log_prob))
}
