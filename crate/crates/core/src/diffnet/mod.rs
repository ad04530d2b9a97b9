//! Numerical substrate: reverse-mode differentiation, MLPs, Adam, the
//! squashed-Gaussian policy head and an MLP autoencoder. Everything is `f64`.

mod adam;
mod autoencoder;
mod mlp;
mod params;
mod policy;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use autoencoder::{AutoEncoder, Encoded, DEFAULT_LATENT_DIM};
pub use mlp::{Activation, Mlp};
pub use params::{Mat, ParamCollection, ParamGrads};
pub use policy::{
    gaussian_policy_sample, gaussian_sample_tape, log_one_minus_tanh_sq, squash_log_std, squash_log_std_tape,
    squashed_log_prob, LOG_STD_MAX, LOG_STD_MIN,
};
pub use tape::{Gradients, Tape, Var};
