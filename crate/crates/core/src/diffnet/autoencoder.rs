use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use super::params::ParamCollection;
use super::tape::{Tape, Var};
use crate::error::Result;

pub const DEFAULT_LATENT_DIM: usize = 50;

/// MLP encoder/decoder pair over vector observations. The latent is
/// tanh-bounded; the reconstruction is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoEncoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

pub struct Encoded {
    pub latent: Var,
    pub reconstruction: Var,
    pub recon_loss: Var,
}

impl AutoEncoder {
    pub fn new(obs_dim: usize, hidden: usize, latent_dim: usize) -> Self {
        Self {
            encoder: Mlp::new(vec![obs_dim, hidden, latent_dim], Activation::Relu, Activation::Tanh)
                .with_prefix("enc"),
            decoder: Mlp::new(vec![latent_dim, hidden, obs_dim], Activation::Relu, Activation::Identity)
                .with_prefix("dec"),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn init_encoder<R: Rng + ?Sized>(&self, params: &mut ParamCollection, rng: &mut R) -> Result<()> {
        self.encoder.init_params(params, rng)
    }

    pub fn init_decoder<R: Rng + ?Sized>(&self, params: &mut ParamCollection, rng: &mut R) -> Result<()> {
        self.decoder.init_params(params, rng)
    }

    pub fn encode(&self, encoder_params: &ParamCollection, obs: Var, tape: &mut Tape) -> Result<Var> {
        self.encoder.forward(encoder_params, obs, tape)
    }

    /// Encodes, decodes and records the mean-squared reconstruction error.
    pub fn autoencode(
        &self,
        encoder_params: &ParamCollection,
        decoder_params: &ParamCollection,
        obs: Var,
        tape: &mut Tape,
    ) -> Result<Encoded> {
        let latent = self.encode(encoder_params, obs, tape)?;
        let reconstruction = self.decoder.forward(decoder_params, latent, tape)?;
        let recon_loss = self.reconstruction_loss(obs, reconstruction, tape)?;
        Ok(Encoded {
            latent,
            reconstruction,
            recon_loss,
        })
    }

    pub fn reconstruction_loss(&self, obs: Var, reconstruction: Var, tape: &mut Tape) -> Result<Var> {
        let diff = tape.sub(reconstruction, obs)?;
        let sq = tape.square(diff);
        Ok(tape.mean(sq))
    }

    pub fn encode_one(&self, encoder_params: &ParamCollection, obs: &[f64]) -> Result<Vec<f64>> {
        self.encoder.infer(encoder_params, obs)
    }
}
