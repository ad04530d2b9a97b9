use ndarray::Array2;
use rand::Rng;

use crate::diffnet::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::sac::{sac_update_with, Batch, Diagnostics, SacNets, SacOptim, ZProvider, ZSource};

use super::znet::{z_forward, Embedding};

/// Builds the embedding column from each row's robot and routes the critic
/// gradient back to that robot's ψ only.
pub struct RoutedZ<'a> {
    embeddings: &'a mut [Embedding],
    source: ZSource,
    /// Robots with at least one row in the current batch.
    present: Vec<bool>,
}

impl<'a> RoutedZ<'a> {
    pub fn new(embeddings: &'a mut [Embedding], source: ZSource) -> Self {
        let n = embeddings.len();
        Self { embeddings, source, present: vec![false; n] }
    }
}

impl ZProvider for RoutedZ<'_> {
    fn build(&mut self, tape: &mut Tape, batch: &Batch) -> Result<Var> {
        self.present.iter_mut().for_each(|p| *p = false);
        let mut zs: Vec<Option<Var>> = vec![None; self.embeddings.len()];
        let mut runs: Vec<Var> = Vec::new();
        let mut start = 0;
        while start < batch.len() {
            let robot = batch.robot[start];
            if robot >= self.embeddings.len() {
                return Err(Error::Contract(format!("batch row refers to unknown robot {robot}")));
            }
            let mut end = start + 1;
            while end < batch.len() && batch.robot[end] == robot {
                end += 1;
            }
            self.present[robot] = true;
            let z = match zs[robot] {
                Some(z) => z,
                None => {
                    let z = match &self.embeddings[robot] {
                        Embedding::Network { net, .. } => z_forward(net, tape)?,
                        Embedding::Constant(c) => tape.constant(Array2::from_elem((1, 1), *c)),
                    };
                    zs[robot] = Some(z);
                    z
                }
            };
            let col = tape.repeat_rows(z, end - start)?;
            let col = match self.source {
                ZSource::Fresh => col,
                // Replayed values, with the gradient of the live embedding
                // passed straight through.
                ZSource::Stored => {
                    let stored = Array2::from_shape_vec((end - start, 1), batch.stored_z[start..end].to_vec())
                        .expect("column");
                    let live = tape.detach(col);
                    let diff = stored - tape.value(live);
                    let offset = tape.constant(diff);
                    tape.add(col, offset)?
                }
            };
            runs.push(col);
            start = end;
        }
        tape.concat_rows(&runs)
    }

    fn grads_finite(&self, grads: &Gradients) -> bool {
        self.embeddings.iter().all(|e| match e {
            Embedding::Network { net, .. } => grads.wrt(&net.params).is_finite(),
            Embedding::Constant(_) => true,
        })
    }

    fn apply(&mut self, grads: &Gradients) -> Result<()> {
        for (e, &present) in self.embeddings.iter_mut().zip(&self.present) {
            if !present {
                continue;
            }
            if let Embedding::Network { net, opt } = e {
                let g = grads.wrt(&net.params);
                opt.step(&mut net.params, &g)?;
            }
        }
        Ok(())
    }
}

/// One routed update on an explicit batch whose rows may come from any
/// subset of robots. The critic and encoder see the whole batch; each ψ_i
/// sees only the loss terms of its own rows; the actor never touches ψ.
pub fn routed_update_batch<R: Rng + ?Sized>(
    nets: &mut SacNets,
    opt: &mut SacOptim,
    embeddings: &mut [Embedding],
    batch: &Batch,
    rng: &mut R,
) -> Result<Diagnostics> {
    let source = nets.config.z_source;
    let mut provider = RoutedZ::new(embeddings, source);
    sac_update_with(nets, opt, batch, &mut provider, rng)
}
