use std::fmt::Write as _;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffnet::{Gradients, Mat, Tape, Var};
use crate::error::Result;

use super::losses::{actor_loss, alpha_loss, critic_loss, critic_target};
use super::nets::{SacNets, SacOptim};
use super::replay::Batch;

/// Losses and statistics of one update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub ae_loss: f64,
    pub alpha: f64,
    pub alpha_loss: f64,
    pub q_mean: f64,
    /// `−mean log π` over the batch.
    pub entropy: f64,
    /// False when a non-finite loss or gradient made the update skip a step.
    pub accepted: bool,
}

impl Diagnostics {
    pub fn is_finite(&self) -> bool {
        [self.critic_loss, self.actor_loss, self.ae_loss, self.alpha, self.alpha_loss, self.q_mean, self.entropy]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Source of the per-sample embedding column used by the critic.
pub trait ZProvider {
    /// Records an n×1 embedding column for `batch` on `tape`.
    fn build(&mut self, tape: &mut Tape, batch: &Batch) -> Result<Var>;

    /// Whether the gradients reaching the provider's parameters are usable.
    fn grads_finite(&self, _grads: &Gradients) -> bool {
        true
    }

    /// Applies the critic-loss gradients to the provider's parameters.
    fn apply(&mut self, _grads: &Gradients) -> Result<()> {
        Ok(())
    }
}

/// A fixed embedding column.
pub struct ConstantZ<'a>(pub &'a Mat);

impl ZProvider for ConstantZ<'_> {
    fn build(&mut self, tape: &mut Tape, _batch: &Batch) -> Result<Var> {
        Ok(tape.constant(self.0.clone()))
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// One SAC+AE update with a constant embedding column `z`.
pub fn sac_update<R: Rng + ?Sized>(
    nets: &mut SacNets,
    opt: &mut SacOptim,
    batch: &Batch,
    z: &Mat,
    rng: &mut R,
) -> Result<Diagnostics> {
    sac_update_with(nets, opt, batch, &mut ConstantZ(z), rng)
}

/// One update: a critic step (TD + reconstruction, through the encoder and
/// into whatever `zp` tracks), an actor step on the frozen critic, an
/// optional temperature step, then a Polyak step of the target critic.
///
/// A non-finite loss or gradient skips the affected step and clears
/// `accepted`; shape errors are returned.
pub fn sac_update_with<R: Rng + ?Sized>(
    nets: &mut SacNets,
    opt: &mut SacOptim,
    batch: &Batch,
    zp: &mut dyn ZProvider,
    rng: &mut R,
) -> Result<Diagnostics> {
    let n = batch.len();
    let next_noise = standard_normal(n, nets.act_dim, rng);
    let actor_noise = standard_normal(n, nets.act_dim, rng);
    let mut diag = Diagnostics { accepted: true, alpha: nets.alpha(), ..Default::default() };

    let mut tape = Tape::new();
    let z = zp.build(&mut tape, batch)?;
    let z_value = tape.value(z).clone();
    let target = critic_target(nets, batch, &z_value, next_noise)?;
    let closs = critic_loss(nets, &mut tape, batch, z, &target)?;
    diag.critic_loss = tape.scalar(closs.td);
    diag.ae_loss = tape.scalar(closs.recon);
    diag.q_mean = closs.q_mean;
    let total = tape.scalar(closs.total);
    if total.is_finite() {
        let grads = tape.backward(closs.total)?;
        let gc = grads.wrt(&nets.critic);
        let gd = grads.wrt(&nets.decoder);
        if gc.is_finite() && gd.is_finite() && zp.grads_finite(&grads) {
            opt.critic.step(&mut nets.critic, &gc)?;
            opt.decoder.step(&mut nets.decoder, &gd)?;
            zp.apply(&grads)?;
        } else {
            diag.accepted = false;
        }
    } else {
        diag.accepted = false;
    }

    let mut tape = Tape::new();
    let aloss = actor_loss(nets, &mut tape, batch, &z_value, actor_noise)?;
    diag.actor_loss = tape.scalar(aloss.loss);
    let log_prob = tape.value(aloss.log_prob).clone();
    diag.entropy = -log_prob.mean().unwrap_or(0.0);
    if diag.actor_loss.is_finite() {
        let grads = tape.backward(aloss.loss)?;
        let ga = grads.wrt(&nets.actor);
        if ga.is_finite() {
            opt.actor.step(&mut nets.actor, &ga)?;
        } else {
            diag.accepted = false;
        }
    } else {
        diag.accepted = false;
    }

    if nets.config.auto_alpha && log_prob.iter().all(|v| v.is_finite()) {
        let mut tape = Tape::new();
        let l = alpha_loss(nets, &mut tape, &log_prob)?;
        diag.alpha_loss = tape.scalar(l);
        let g = tape.backward(l)?.wrt(&nets.log_alpha);
        if g.is_finite() {
            opt.alpha.step(&mut nets.log_alpha, &g)?;
        }
        diag.alpha = nets.alpha();
    }

    let polyak = nets.config.polyak;
    nets.critic_target.polyak_from(&nets.critic, polyak)?;
    Ok(diag)
}

/// Streams update diagnostics as CSV rows.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsLog {
    rows: String,
    robots: usize,
}

impl DiagnosticsLog {
    pub fn new(robots: usize) -> Self {
        let mut rows = String::from("update,critic_loss,actor_loss,ae_loss,alpha");
        for i in 0..robots {
            let _ = write!(rows, ",z_{i}");
        }
        rows.push('\n');
        Self { rows, robots }
    }

    pub fn record(&mut self, update: u64, d: &Diagnostics, z: &[f64]) {
        let _ = write!(self.rows, "{update},{},{},{},{}", d.critic_loss, d.actor_loss, d.ae_loss, d.alpha);
        for i in 0..self.robots {
            let _ = write!(self.rows, ",{}", z.get(i).copied().unwrap_or(f64::NAN));
        }
        self.rows.push('\n');
    }

    pub fn as_csv(&self) -> &str {
        &self.rows
    }
}
