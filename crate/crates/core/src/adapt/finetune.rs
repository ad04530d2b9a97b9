use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multirobot::{seeded_stream, Embedding, RobotSlot, RobotSpec};
use crate::sac::{sac_update, z_column, SacNets, SacOptim};

const STREAM_FT_COLLECT: u64 = 1 << 42;
const STREAM_FT_UPDATE: u64 = (1 << 42) + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    /// Embedding held fixed during fine-tuning (zero for No-z).
    pub z: f64,
    pub updates_per_step: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { z: 0.0, updates_per_step: 1, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub nets: SacNets,
    pub env_steps: u64,
    pub updates: u64,
    pub rejected_updates: u64,
}

/// Continues SAC+AE training of the whole policy (actor, critics, encoder)
/// on `robot` alone for `budget` environment steps. Collection follows the
/// current policy from the first step; updates start once the buffer holds
/// one batch. Optimiser moments start from zero.
pub fn no_z_finetune(nets: &SacNets, robot: &RobotSpec, budget: u64, config: &FinetuneConfig) -> Result<FinetuneOutcome> {
    if !config.z.is_finite() {
        return Err(Error::Config("fine-tuning embedding must be finite".into()));
    }
    let mut nets = nets.clone();
    let mut opt = SacOptim::new(&nets);
    let batch_size = nets.config.batch_size;
    let mut slot = RobotSlot::new(
        0,
        robot.clone(),
        Embedding::Constant(config.z),
        nets.config.buffer_capacity,
        seeded_stream(config.seed, STREAM_FT_COLLECT),
    )?;
    let mut rng = seeded_stream(config.seed, STREAM_FT_UPDATE);
    let z = z_column(batch_size, config.z);
    let (mut updates, mut rejected) = (0, 0);
    for _ in 0..budget {
        slot.collect(&nets, 1, 0)?;
        if slot.buffer.len() < batch_size {
            continue;
        }
        for _ in 0..config.updates_per_step {
            let batch = slot.buffer.sample(batch_size, &mut rng)?;
            let d = sac_update(&mut nets, &mut opt, &batch, &z, &mut rng)?;
            updates += 1;
            rejected += u64::from(!d.accepted);
        }
    }
    if !nets.is_finite() {
        return Err(Error::NonFinite("fine-tuning produced non-finite parameters".into()));
    }
    Ok(FinetuneOutcome { nets, env_steps: budget, updates, rejected_updates: rejected })
}
