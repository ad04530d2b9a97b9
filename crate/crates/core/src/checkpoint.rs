//! Binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "LGNVCKPT" | version u32 | config sha256 [32] | config toml (u64 len + bytes)
//! obs_dim u64 | act_dim u64 | env_steps u64 | updates u64
//! collections: u32 count, each { name, u32 entries, each { name, rows u64, cols u64, f64 × rows·cols } }
//! robots:      u32 count, each { name, kind u8, kind 0: z f64
//!                                            | kind 1: u32 input len, f64 × len, collection }
//! rngs:        u32 count, each { name, seed [32], stream u64, word_pos u128 }
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{hash_text, ExperimentConfig};
use crate::diffnet::ParamCollection;
use crate::error::{Error, Result};
use crate::multirobot::{Embedding, Trainer, ZNetwork};
use crate::sac::SacNets;

pub const MAGIC: &[u8; 8] = b"LGNVCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Position of a ChaCha8 generator, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone)]
pub struct RobotEntry {
    pub name: String,
    pub embedding: Embedding,
}

/// Everything needed to evaluate or adapt a trained policy.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub nets: SacNets,
    pub robots: Vec<RobotEntry>,
    pub rngs: Vec<(String, RngState)>,
    pub env_steps: u64,
    pub updates: u64,
}

impl Checkpoint {
    pub fn from_trainer(config: &ExperimentConfig, trainer: &Trainer) -> Self {
        let mut rngs = vec![("update".to_string(), RngState::capture(&trainer.update_rng))];
        for s in &trainer.slots {
            rngs.push((format!("collect:{}", s.spec.name), RngState::capture(&s.rng)));
        }
        Self {
            config: config.clone(),
            nets: trainer.nets.clone(),
            robots: trainer
                .slots
                .iter()
                .map(|s| RobotEntry { name: s.spec.name.clone(), embedding: s.embedding.clone() })
                .collect(),
            rngs,
            env_steps: trainer.env_steps,
            updates: trainer.updates,
        }
    }

    /// Embedding of a training robot.
    pub fn z(&self, robot: &str) -> Result<f64> {
        self.robots
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(robot))
            .ok_or_else(|| Error::Config(format!("robot `{robot}` is not in the checkpoint")))?
            .embedding
            .value()
    }

    pub fn config_hash(&self) -> Result<String> {
        self.config.hash()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let toml = self.config.to_toml()?;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.0.extend_from_slice(&hex::decode(hash_text(&toml)).expect("hex digest"));
        w.u64(toml.len() as u64);
        w.0.extend_from_slice(toml.as_bytes());
        w.u64(self.nets.obs_dim as u64);
        w.u64(self.nets.act_dim as u64);
        w.u64(self.env_steps);
        w.u64(self.updates);
        let cols = self.nets.collections();
        w.u32(cols.len() as u32);
        for (name, c) in cols {
            w.str(name);
            w.collection(c);
        }
        w.u32(self.robots.len() as u32);
        for r in &self.robots {
            w.str(&r.name);
            match &r.embedding {
                Embedding::Constant(z) => {
                    w.0.push(0);
                    w.f64(*z);
                }
                Embedding::Network { net, .. } => {
                    w.0.push(1);
                    let input = net.fixed_input.clone().unwrap_or_default();
                    w.u32(input.len() as u32);
                    input.iter().for_each(|v| w.f64(*v));
                    w.collection(&net.params);
                }
            }
        }
        w.u32(self.rngs.len() as u32);
        for (name, s) in &self.rngs {
            w.str(name);
            w.0.extend_from_slice(&s.seed);
            w.u64(s.stream);
            w.0.extend_from_slice(&s.word_pos.to_le_bytes());
        }
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let hash = hex::encode(r.take(32)?);
        let len = r.u64()? as usize;
        let toml = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
        if hash_text(toml) != hash {
            return Err(Error::Checkpoint("config hash mismatch".into()));
        }
        let config = ExperimentConfig::from_toml_str(toml)?;
        let obs_dim = r.u64()? as usize;
        let act_dim = r.u64()? as usize;
        let env_steps = r.u64()?;
        let updates = r.u64()?;

        let mut init = ChaCha8Rng::seed_from_u64(0);
        let mut nets = SacNets::new(obs_dim, act_dim, config.train.sac.clone(), &mut init)?;
        let count = r.u32()? as usize;
        if count != nets.collections().len() {
            return Err(Error::Checkpoint(format!("{count} collections, expected {}", nets.collections().len())));
        }
        for (name, c) in nets.collections_mut() {
            let got = r.str()?;
            if got != name {
                return Err(Error::Checkpoint(format!("collection `{got}` where `{name}` was expected")));
            }
            r.collection_into(c)?;
        }

        let mut robots = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let embedding = match r.take(1)?[0] {
                0 => Embedding::Constant(r.f64()?),
                1 => {
                    let n = r.u32()? as usize;
                    let input = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    let mut net = if n == 0 {
                        ZNetwork::learned(config.train.z_hidden, &mut init)?
                    } else {
                        ZNetwork::informed(input, config.train.z_hidden, &mut init)?
                    };
                    r.collection_into(&mut net.params)?;
                    Embedding::network(net, config.train.z_lr)
                }
                k => return Err(Error::Checkpoint(format!("unknown embedding kind {k}"))),
            };
            robots.push(RobotEntry { name, embedding });
        }

        let mut rngs = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
            let stream = r.u64()?;
            let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
            rngs.push((name, RngState { seed, stream, word_pos }));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { config, nets, robots, rngs, env_steps, updates })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn collection(&mut self, c: &ParamCollection) {
        self.u32(c.len() as u32);
        for (name, v) in c.names().iter().zip(c.values()) {
            self.str(name);
            self.u64(v.nrows() as u64);
            self.u64(v.ncols() as u64);
            v.iter().for_each(|x| self.f64(*x));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))
    }

    /// Reads a collection into `dst`, which fixes the expected names and shapes.
    fn collection_into(&mut self, dst: &mut ParamCollection) -> Result<()> {
        let n = self.u32()? as usize;
        if n != dst.len() {
            return Err(Error::Checkpoint(format!("{n} entries, expected {}", dst.len())));
        }
        for idx in 0..n {
            let name = self.str()?;
            let (rows, cols) = (self.u64()? as usize, self.u64()? as usize);
            if name != dst.name(idx) || (rows, cols) != dst.value(idx).dim() {
                return Err(Error::Checkpoint(format!(
                    "entry `{name}` {rows}×{cols} does not match `{}` {:?}",
                    dst.name(idx),
                    dst.value(idx).dim()
                )));
            }
            let values = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            dst.set(idx, Array2::from_shape_vec((rows, cols), values).expect("shape"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multirobot::Method;

    fn small_config(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.train.method = method;
        cfg.train.total_steps = 300;
        cfg.train.warmup_steps = 50;
        cfg.train.z_hidden = 8;
        cfg.train.sac.hidden = 16;
        cfg.train.sac.encoder_hidden = 16;
        cfg.train.sac.latent_dim = 4;
        cfg.train.sac.batch_size = 12;
        cfg
    }

    fn trained(method: Method) -> (ExperimentConfig, Trainer) {
        let cfg = small_config(method);
        let mut t = Trainer::new(cfg.training_robots().unwrap(), cfg.train.clone()).unwrap();
        t.run().unwrap();
        (cfg, t)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for method in [Method::LearnedZ, Method::FixedZ, Method::InformedZ] {
            let (cfg, t) = trained(method);
            let ck = Checkpoint::from_trainer(&cfg, &t);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert!(back.nets.bit_eq(&ck.nets));
            for (a, b) in ck.robots.iter().zip(&back.robots) {
                assert_eq!(a.name, b.name);
                assert_eq!(a.embedding.value().unwrap().to_bits(), b.embedding.value().unwrap().to_bits());
            }
            assert_eq!(back.rngs, ck.rngs);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn rng_state_resumes_stream() {
        use rand::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rng.set_stream(4);
        rng.next_u64();
        let mut copy = RngState::capture(&rng).restore();
        assert_eq!(rng.next_u64(), copy.next_u64());
    }

    #[test]
    fn corrupt_files_rejected() {
        let (cfg, t) = trained(Method::NoZ);
        let bytes = Checkpoint::from_trainer(&cfg, &t).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[8] = 99;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(m)) if m.contains("version")));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"nonsense").is_err());
        let mut tampered = bytes.clone();
        let at = 8 + 4 + 32 + 8 + 2;
        tampered[at] ^= 1;
        assert!(Checkpoint::from_bytes(&tampered).is_err());
    }
}
