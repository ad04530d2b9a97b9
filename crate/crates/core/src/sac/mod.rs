//! Soft actor-critic with a reconstruction-trained encoder, conditioned on a
//! scalar robot embedding `z`.

mod losses;
mod nets;
mod replay;
mod update;

pub use losses::{actor_loss, alpha_loss, critic_loss, critic_target, ActorLoss, CriticLoss, PolicyOut};
pub use nets::{z_column, SacConfig, SacNets, SacOptim, ZSource, Z_DIM};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use update::{sac_update, sac_update_with, standard_normal, ConstantZ, Diagnostics, DiagnosticsLog, ZProvider};
