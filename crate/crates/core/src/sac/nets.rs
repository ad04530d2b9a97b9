use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffnet::{
    gaussian_policy_sample, squash_log_std, Activation, AdamConfig, AdamState, AutoEncoder, Mat, Mlp,
    ParamCollection,
};
use crate::error::{Error, Result};

/// Whether the embedding used in an update comes from the live z-network or
/// from the value recorded when the transition was collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZSource {
    #[default]
    Fresh,
    Stored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub hidden: usize,
    pub encoder_hidden: usize,
    pub latent_dim: usize,
    pub discount: f64,
    pub polyak: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub init_alpha: f64,
    pub auto_alpha: bool,
    /// Defaults to `−act_dim` when unset.
    pub target_entropy: Option<f64>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub decoder_lr: f64,
    pub alpha_lr: f64,
    pub ae_weight: f64,
    /// Multiplies environment rewards before they enter the critic target.
    pub reward_scale: f64,
    pub z_source: ZSource,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            encoder_hidden: 256,
            latent_dim: 50,
            discount: 0.99,
            polyak: 0.005,
            batch_size: 128,
            buffer_capacity: 100_000,
            init_alpha: 0.1,
            auto_alpha: false,
            target_entropy: None,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            decoder_lr: 1e-3,
            alpha_lr: 1e-4,
            ae_weight: 1.0,
            reward_scale: 1.0,
            z_source: ZSource::Fresh,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden == 0 || self.encoder_hidden == 0 || self.latent_dim == 0 {
            return bad("network widths must be positive");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return bad("polyak must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch size and buffer capacity must be positive");
        }
        if !(self.init_alpha > 0.0 && self.init_alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        for (name, lr) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("decoder_lr", self.decoder_lr),
            ("alpha_lr", self.alpha_lr),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if !(self.ae_weight >= 0.0 && self.reward_scale > 0.0) {
            return bad("ae_weight must be non-negative and reward_scale positive");
        }
        Ok(())
    }
}

/// All trainable state of the agent.
///
/// `critic` holds the encoder (`enc*`) and both Q heads (`q1*`, `q2*`);
/// `critic_target` is its slowly tracking copy. The actor reads the encoder
/// output but never trains it.
#[derive(Debug, Clone)]
pub struct SacNets {
    pub config: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub ae: AutoEncoder,
    pub actor_net: Mlp,
    pub q1_net: Mlp,
    pub q2_net: Mlp,
    pub critic: ParamCollection,
    pub critic_target: ParamCollection,
    pub actor: ParamCollection,
    pub decoder: ParamCollection,
    pub log_alpha: ParamCollection,
}

/// Width of the embedding appended to the latent state.
pub const Z_DIM: usize = 1;

impl SacNets {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, config: SacConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 || act_dim == 0 {
            return Err(Error::Config("observation and action sizes must be positive".into()));
        }
        let h = config.hidden;
        let ae = AutoEncoder::new(obs_dim, config.encoder_hidden, config.latent_dim);
        let feat = config.latent_dim + Z_DIM;
        let actor_net = Mlp::new(vec![feat, h, h, 2 * act_dim], Activation::Relu, Activation::Identity).with_prefix("pi");
        let q1_net = Mlp::new(vec![feat + act_dim, h, h, 1], Activation::Relu, Activation::Identity).with_prefix("q1");
        let q2_net = Mlp::new(vec![feat + act_dim, h, h, 1], Activation::Relu, Activation::Identity).with_prefix("q2");

        let mut critic = ParamCollection::new();
        ae.init_encoder(&mut critic, rng)?;
        q1_net.init_params(&mut critic, rng)?;
        q2_net.init_params(&mut critic, rng)?;
        let critic_target = critic.clone();
        let mut actor = ParamCollection::new();
        actor_net.init_params(&mut actor, rng)?;
        let mut decoder = ParamCollection::new();
        ae.init_decoder(&mut decoder, rng)?;
        let mut log_alpha = ParamCollection::new();
        log_alpha.insert("log_alpha", Array2::from_elem((1, 1), config.init_alpha.ln()))?;

        Ok(Self {
            config,
            obs_dim,
            act_dim,
            ae,
            actor_net,
            q1_net,
            q2_net,
            critic,
            critic_target,
            actor,
            decoder,
            log_alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.value(0)[[0, 0]].exp()
    }

    pub fn target_entropy(&self) -> f64 {
        self.config.target_entropy.unwrap_or(-(self.act_dim as f64))
    }

    /// Pre-squash mean and squashed log-std for one observation.
    pub fn policy_head(&self, obs: &[f64], z: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut feat = self.ae.encode_one(&self.critic, obs)?;
        feat.push(z);
        let out = self.actor_net.infer(&self.actor, &feat)?;
        let mean = out[..self.act_dim].to_vec();
        let log_std = out[self.act_dim..].iter().map(|&r| squash_log_std(r)).collect();
        Ok((mean, log_std))
    }

    /// Action in `[-1, 1]^act_dim`: `tanh(mean)` when greedy, else a sample.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], z: f64, greedy: bool, rng: &mut R) -> Result<Vec<f64>> {
        let (mean, log_std) = self.policy_head(obs, z)?;
        if greedy {
            return Ok(mean.iter().map(|m| m.tanh()).collect());
        }
        Ok(gaussian_policy_sample(&mean, &log_std, rng).0)
    }

    /// Named parameter groups, for serialisation and comparisons.
    pub fn collections(&self) -> [(&'static str, &ParamCollection); 5] {
        [
            ("critic", &self.critic),
            ("critic_target", &self.critic_target),
            ("actor", &self.actor),
            ("decoder", &self.decoder),
            ("log_alpha", &self.log_alpha),
        ]
    }

    pub fn collections_mut(&mut self) -> [(&'static str, &mut ParamCollection); 5] {
        [
            ("critic", &mut self.critic),
            ("critic_target", &mut self.critic_target),
            ("actor", &mut self.actor),
            ("decoder", &mut self.decoder),
            ("log_alpha", &mut self.log_alpha),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.collections().iter().all(|(_, c)| c.is_finite())
    }

    /// True when every parameter of `self` and `other` is bit-identical.
    pub fn bit_eq(&self, other: &SacNets) -> bool {
        self.collections()
            .iter()
            .zip(other.collections().iter())
            .all(|((_, a), (_, b))| a.bit_eq(b))
    }
}

/// Optimiser state matching [`SacNets`].
#[derive(Debug, Clone)]
pub struct SacOptim {
    pub critic: AdamState,
    pub actor: AdamState,
    pub decoder: AdamState,
    pub alpha: AdamState,
}

impl SacOptim {
    pub fn new(nets: &SacNets) -> Self {
        let c = &nets.config;
        Self {
            critic: AdamState::new(&nets.critic, AdamConfig::with_lr(c.critic_lr)),
            actor: AdamState::new(&nets.actor, AdamConfig::with_lr(c.actor_lr)),
            decoder: AdamState::new(&nets.decoder, AdamConfig::with_lr(c.decoder_lr)),
            alpha: AdamState::new(&nets.log_alpha, AdamConfig::with_lr(c.alpha_lr)),
        }
    }
}

/// Column of `n` copies of `z`.
pub fn z_column(n: usize, z: f64) -> Mat {
    Array2::from_elem((n, 1), z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> SacConfig {
        SacConfig { hidden: 8, encoder_hidden: 8, latent_dim: 4, ..Default::default() }
    }

    #[test]
    fn target_starts_equal_to_critic() {
        let nets = SacNets::new(5, 1, small(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(nets.critic.bit_eq(&nets.critic_target));
        assert_ne!(nets.critic.id(), nets.critic_target.id());
        assert!((nets.alpha() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn actions_are_bounded() {
        let nets = SacNets::new(5, 2, small(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for greedy in [true, false] {
            let a = nets.act(&[1.0, -2.0, 0.3, 0.0, 5.0], 0.4, greedy, &mut rng).unwrap();
            assert_eq!(a.len(), 2);
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = SacConfig { discount: 1.0, ..small() };
        assert!(SacNets::new(5, 1, c, &mut rng).is_err());
        let c = SacConfig { polyak: 0.0, ..small() };
        assert!(SacNets::new(5, 1, c, &mut rng).is_err());
    }
}
