use crate::diffnet::{gaussian_sample_tape, squash_log_std_tape, Mat, Tape, Var};
use crate::error::{Error, Result};

use super::nets::SacNets;
use super::replay::Batch;

/// Recorded squashed-Gaussian policy output for a batch of features.
pub struct PolicyOut {
    pub action: Var,
    /// n×1
    pub log_prob: Var,
}

fn policy_forward(nets: &SacNets, tape: &mut Tape, features: Var, noise: Mat, track_actor: bool) -> Result<PolicyOut> {
    let out = if track_actor {
        nets.actor_net.forward(&nets.actor, features, tape)?
    } else {
        nets.actor_net.forward_detached(&nets.actor, features, tape)?
    };
    let mean = tape.slice_cols(out, 0, nets.act_dim)?;
    let raw = tape.slice_cols(out, nets.act_dim, 2 * nets.act_dim)?;
    let log_std = squash_log_std_tape(tape, raw);
    let (action, log_prob) = gaussian_sample_tape(tape, mean, log_std, noise)?;
    Ok(PolicyOut { action, log_prob })
}

fn check_batch(nets: &SacNets, batch: &Batch, z: &Mat) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if batch.obs.ncols() != nets.obs_dim || batch.act.ncols() != nets.act_dim {
        return Err(Error::Shape("batch does not match network dimensions".into()));
    }
    if z.dim() != (batch.len(), 1) {
        return Err(Error::Shape(format!("z has shape {:?}, expected ({}, 1)", z.dim(), batch.len())));
    }
    Ok(())
}

/// Bootstrapped soft target
/// `y = scale·r + γ·(1 − terminal)·(min(Q̄₁, Q̄₂)(s′, z, a′) − α·log π(a′|s′, z))`
/// with `a′` drawn from the current policy using `next_noise`. Nothing here
/// is differentiated.
pub fn critic_target(nets: &SacNets, batch: &Batch, z: &Mat, next_noise: Mat) -> Result<Mat> {
    check_batch(nets, batch, z)?;
    let mut tape = Tape::new();
    let next_obs = tape.constant(batch.next_obs.clone());
    let zc = tape.constant(z.clone());
    let latent = nets.ae.encoder.forward_detached(&nets.critic, next_obs, &mut tape)?;
    let feat = tape.concat_cols(&[latent, zc])?;
    let pi = policy_forward(nets, &mut tape, feat, next_noise, false)?;

    let latent_t = nets.ae.encoder.forward_detached(&nets.critic_target, next_obs, &mut tape)?;
    let q_in = tape.concat_cols(&[latent_t, zc, pi.action])?;
    let q1 = nets.q1_net.forward_detached(&nets.critic_target, q_in, &mut tape)?;
    let q2 = nets.q2_net.forward_detached(&nets.critic_target, q_in, &mut tape)?;
    let qmin = tape.min(q1, q2)?;

    let alpha = nets.alpha();
    let soft = tape.value(qmin) - &(tape.value(pi.log_prob) * alpha);
    let scale = nets.config.reward_scale;
    let gamma = nets.config.discount;
    Ok(&batch.reward * scale + &(&batch.not_terminal * &soft) * gamma)
}

pub struct CriticLoss {
    /// TD loss plus weighted reconstruction loss.
    pub total: Var,
    /// `mean((Q₁ − y)²) + mean((Q₂ − y)²)`
    pub td: Var,
    pub recon: Var,
    /// Mean of both heads' predictions.
    pub q_mean: f64,
}

/// Twin-critic regression toward `target` plus the autoencoder loss. The
/// encoder and both heads (and `z`, if it is a tracked variable) receive
/// gradient; `target` is a constant.
pub fn critic_loss(nets: &SacNets, tape: &mut Tape, batch: &Batch, z: Var, target: &Mat) -> Result<CriticLoss> {
    check_batch(nets, batch, tape.value(z))?;
    if target.dim() != (batch.len(), 1) {
        return Err(Error::Shape("critic target must be n×1".into()));
    }
    let obs = tape.constant(batch.obs.clone());
    let act = tape.constant(batch.act.clone());
    let enc = nets.ae.autoencode(&nets.critic, &nets.decoder, obs, tape)?;
    let q_in = tape.concat_cols(&[enc.latent, z, act])?;
    let q1 = nets.q1_net.forward(&nets.critic, q_in, tape)?;
    let q2 = nets.q2_net.forward(&nets.critic, q_in, tape)?;
    let q_mean = 0.5 * (tape.value(q1).mean().unwrap_or(0.0) + tape.value(q2).mean().unwrap_or(0.0));
    let y = tape.constant(target.clone());
    let d1 = tape.sub(q1, y)?;
    let d2 = tape.sub(q2, y)?;
    let s1 = tape.square(d1);
    let s2 = tape.square(d2);
    let m1 = tape.mean(s1);
    let m2 = tape.mean(s2);
    let td = tape.add(m1, m2)?;
    let weighted = tape.scale(enc.recon_loss, nets.config.ae_weight);
    let total = tape.add(td, weighted)?;
    Ok(CriticLoss { total, td, recon: enc.recon_loss, q_mean })
}

pub struct ActorLoss {
    pub loss: Var,
    /// n×1, tracked.
    pub log_prob: Var,
}

/// `mean(α·log π(a|s, z) − min(Q₁, Q₂)(s, a, z))` with reparameterised
/// actions. Encoder, critic weights and `z` enter as constants, so only the
/// actor collection receives gradient.
pub fn actor_loss(nets: &SacNets, tape: &mut Tape, batch: &Batch, z: &Mat, noise: Mat) -> Result<ActorLoss> {
    check_batch(nets, batch, z)?;
    let obs = tape.constant(batch.obs.clone());
    let zc = tape.constant(z.clone());
    let latent = nets.ae.encoder.forward_detached(&nets.critic, obs, tape)?;
    let feat = tape.concat_cols(&[latent, zc])?;
    let pi = policy_forward(nets, tape, feat, noise, true)?;
    let q_in = tape.concat_cols(&[latent, zc, pi.action])?;
    let q1 = nets.q1_net.forward_detached(&nets.critic, q_in, tape)?;
    let q2 = nets.q2_net.forward_detached(&nets.critic, q_in, tape)?;
    let qmin = tape.min(q1, q2)?;
    let ent = tape.scale(pi.log_prob, nets.alpha());
    let per = tape.sub(ent, qmin)?;
    let loss = tape.mean(per);
    Ok(ActorLoss { loss, log_prob: pi.log_prob })
}

/// Temperature loss `mean(−log α · (log π + H̄))`, tracked on `log_alpha`.
pub fn alpha_loss(nets: &SacNets, tape: &mut Tape, log_prob: &Mat) -> Result<Var> {
    let la = tape.param(&nets.log_alpha, 0);
    let h = nets.target_entropy();
    let mean_term = log_prob.mean().unwrap_or(0.0) + h;
    let scaled = tape.scale(la, -mean_term);
    Ok(tape.sum(scaled))
}
