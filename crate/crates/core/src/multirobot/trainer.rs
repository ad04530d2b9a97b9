use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{informed_z_input, EpisodeResult, Metrics};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::sac::{Batch, Diagnostics, DiagnosticsLog, ReplayBuffer, SacConfig, SacNets, SacOptim, Transition};

use super::routed::routed_update_batch;
use super::spec::{Method, RobotSpec};
use super::znet::{Embedding, ZNetwork, Z_HIDDEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Environment steps summed over all robots.
    pub total_steps: u64,
    /// Per-robot transitions collected with uniform random actions first.
    pub warmup_steps: usize,
    /// Per-robot environment steps between update rounds.
    pub collect_steps: usize,
    /// Routed updates per round.
    pub updates_per_round: usize,
    /// Evaluate every this many total environment steps.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub z_hidden: usize,
    pub z_lr: f64,
    pub seed: u64,
    /// Collector threads; 1 runs everything on the calling thread.
    pub workers: usize,
    pub sac: SacConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::LearnedZ,
            total_steps: 150_000,
            warmup_steps: 1_000,
            collect_steps: 1,
            updates_per_round: 1,
            eval_every: 5_000,
            eval_episodes: 10,
            z_hidden: Z_HIDDEN,
            z_lr: 1e-3,
            seed: 0,
            workers: 1,
            sac: SacConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.sac.validate()?;
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be positive".into()));
        }
        if self.collect_steps == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("collect_steps, eval_every and eval_episodes must be positive".into()));
        }
        if self.z_hidden == 0 || !(self.z_lr >= 0.0) {
            return Err(Error::Config("z-network settings invalid".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Independent random stream `stream` of the run seeded with `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_INIT: u64 = 0;
const STREAM_UPDATE: u64 = 1;
const STREAM_COLLECT: u64 = 100;
const STREAM_ZINIT: u64 = 200;
const STREAM_EVAL: u64 = 1 << 20;

/// Constant embedding for robot `i` of `n` under Fixed-z.
pub fn fixed_z_value(i: usize, n: usize) -> f64 {
    if n <= 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollectStats {
    pub steps: usize,
    pub episodes: usize,
    /// Mean return of episodes completed during this collection.
    pub mean_return: f64,
    pub successes: usize,
}

/// One training robot: its environment, embedding and replay buffer.
pub struct RobotSlot {
    pub id: usize,
    pub spec: RobotSpec,
    pub env: Box<dyn Env>,
    pub embedding: Embedding,
    pub buffer: ReplayBuffer,
    pub rng: ChaCha8Rng,
    obs: Option<Vec<f64>>,
    ep_return: f64,
    pub fault: Option<String>,
}

impl RobotSlot {
    pub fn new(id: usize, spec: RobotSpec, embedding: Embedding, capacity: usize, rng: ChaCha8Rng) -> Result<Self> {
        let env = spec.env.build()?;
        Ok(Self {
            id,
            spec,
            env,
            embedding,
            buffer: ReplayBuffer::new(capacity)?,
            rng,
            obs: None,
            ep_return: 0.0,
            fault: None,
        })
    }

    pub fn z(&self) -> f64 {
        self.embedding.value().unwrap_or(f64::NAN)
    }

    /// Takes `steps` environment steps, acting randomly while the buffer
    /// holds fewer than `warmup` transitions.
    pub fn collect(&mut self, nets: &SacNets, steps: usize, warmup: usize) -> Result<CollectStats> {
        let z = self.embedding.value()?;
        let mut stats = CollectStats::default();
        let mut returns = 0.0;
        for _ in 0..steps {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => {
                    self.ep_return = 0.0;
                    self.env.reset(&mut self.rng)
                }
            };
            let act: Vec<f64> = if self.buffer.len() < warmup {
                (0..nets.act_dim).map(|_| self.rng.random_range(-1.0..1.0)).collect()
            } else {
                nets.act(&obs, z, false, &mut self.rng)?
            };
            let step = self.env.step(&act, &mut self.rng)?;
            self.ep_return += step.reward;
            self.buffer.push(Transition {
                obs,
                act,
                reward: step.reward,
                next_obs: step.obs.clone(),
                done: step.done,
                terminal: step.terminal,
                robot_id: self.id,
                z,
            })?;
            stats.steps += 1;
            if step.done {
                stats.episodes += 1;
                stats.successes += step.success as usize;
                returns += self.ep_return;
            } else {
                self.obs = Some(step.obs);
            }
        }
        if stats.episodes > 0 {
            stats.mean_return = returns / stats.episodes as f64;
        }
        Ok(stats)
    }
}

/// Rolls out one episode with the shared policy at embedding `z`.
pub fn run_episode(env: &mut dyn Env, nets: &SacNets, z: f64, greedy: bool, rng: &mut dyn RngCore) -> Result<EpisodeResult> {
    let mut obs = env.reset(rng);
    let mut ret = 0.0;
    let mut steps = 0;
    loop {
        let act = nets.act(&obs, z, greedy, rng)?;
        let s = env.step(&act, rng)?;
        ret += s.reward;
        steps += 1;
        if s.done {
            return Ok(EpisodeResult {
                success: s.success,
                path_length: s.path_length,
                shortest_path: s.shortest_path,
                steps,
                ret,
            });
        }
        obs = s.obs;
    }
}

/// Greedy evaluation of `episodes` episodes on a fresh environment.
pub fn evaluate_policy(spec: &RobotSpec, nets: &SacNets, z: f64, episodes: usize, rng: &mut dyn RngCore) -> Result<Metrics> {
    let mut env = spec.env.build()?;
    let results = (0..episodes)
        .map(|_| run_episode(env.as_mut(), nets, z, true, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_results(&results))
}

/// One row of the training curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub robot_id: usize,
    pub ret: f64,
    pub success: f64,
    pub z: f64,
}

pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("step,robot_id,return,success,z\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.step, r.robot_id, r.ret, r.success, r.z);
    }
    out
}

/// Steps each slot in parallel (or serially with one worker). A slot whose
/// environment fails is flagged and skipped; the others proceed.
pub fn collect_parallel(
    slots: &mut [RobotSlot],
    nets: &SacNets,
    steps_per_robot: usize,
    warmup: usize,
    workers: usize,
) -> Vec<CollectStats> {
    let work = |slot: &mut RobotSlot| -> CollectStats {
        if slot.fault.is_some() {
            return CollectStats::default();
        }
        match slot.collect(nets, steps_per_robot, warmup) {
            Ok(s) => s,
            Err(e) => {
                slot.fault = Some(e.to_string());
                CollectStats::default()
            }
        }
    };
    if workers <= 1 || slots.len() <= 1 {
        return slots.iter_mut().map(work).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| slots.par_iter_mut().map(work).collect()),
        Err(_) => slots.iter_mut().map(work).collect(),
    }
}

/// The shared agent, the per-robot slots and the loop that trains them.
pub struct Trainer {
    pub config: TrainConfig,
    pub nets: SacNets,
    pub opt: SacOptim,
    pub slots: Vec<RobotSlot>,
    pub update_rng: ChaCha8Rng,
    pub env_steps: u64,
    pub updates: u64,
    pub evals_done: u64,
    pub curves: Vec<CurveRow>,
    pub diagnostics: DiagnosticsLog,
    pub rejected_updates: u64,
}

/// Result of [`Trainer::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub env_steps: u64,
    pub updates: u64,
    /// Set when training stopped on non-finite parameters; the trainer then
    /// holds the last finite parameters.
    pub aborted: Option<String>,
}

impl Trainer {
    pub fn new(robots: Vec<RobotSpec>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let first = robots.first().ok_or_else(|| Error::Config("no training robots".into()))?;
        let (obs_dim, act_dim) = (first.env.obs_dim(), first.env.act_dim());
        if robots.iter().any(|r| r.env.obs_dim() != obs_dim || r.env.act_dim() != act_dim) {
            return Err(Error::Config("training robots disagree on observation/action sizes".into()));
        }
        let n = robots.len();
        let mut init = seeded_stream(config.seed, STREAM_INIT);
        let nets = SacNets::new(obs_dim, act_dim, config.sac.clone(), &mut init)?;
        let opt = SacOptim::new(&nets);
        let train_envs: Vec<_> = robots.iter().map(|r| r.env.clone()).collect();
        let mut slots = Vec::with_capacity(n);
        for (i, spec) in robots.into_iter().enumerate() {
            let mut zrng = seeded_stream(config.seed, STREAM_ZINIT + i as u64);
            let embedding = match config.method {
                Method::LearnedZ => Embedding::network(ZNetwork::learned(config.z_hidden, &mut zrng)?, config.z_lr),
                Method::InformedZ | Method::SemiInformedZ => {
                    let input = informed_z_input(&spec.env, &train_envs, config.method).expect("informed method");
                    Embedding::network(ZNetwork::informed(input, config.z_hidden, &mut zrng)?, config.z_lr)
                }
                Method::FixedZ => Embedding::Constant(fixed_z_value(i, n)),
                Method::NoZ => Embedding::Constant(0.0),
            };
            let rng = seeded_stream(config.seed, STREAM_COLLECT + i as u64);
            slots.push(RobotSlot::new(i, spec, embedding, config.sac.buffer_capacity, rng)?);
        }
        Ok(Self {
            update_rng: seeded_stream(config.seed, STREAM_UPDATE),
            diagnostics: DiagnosticsLog::new(n),
            config,
            nets,
            opt,
            slots,
            env_steps: 0,
            updates: 0,
            evals_done: 0,
            curves: Vec::new(),
            rejected_updates: 0,
        })
    }

    pub fn num_robots(&self) -> usize {
        self.slots.len()
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.slots.iter().map(RobotSlot::z).collect()
    }

    pub fn per_robot_batch(&self) -> usize {
        (self.config.sac.batch_size / self.num_robots()).max(1)
    }

    /// Draws `batch/N` transitions from every buffer and performs one routed
    /// update. Deferred (returns `None`) while any buffer is too small.
    pub fn routed_update(&mut self) -> Result<Option<Diagnostics>> {
        let per = self.per_robot_batch();
        if self.slots.iter().any(|s| s.buffer.len() < per) {
            return Ok(None);
        }
        let parts = self
            .slots
            .iter()
            .map(|s| s.buffer.sample(per, &mut self.update_rng))
            .collect::<Result<Vec<Batch>>>()?;
        let batch = Batch::concat(&parts)?;
        let mut embeddings: Vec<Embedding> = self
            .slots
            .iter_mut()
            .map(|s| std::mem::replace(&mut s.embedding, Embedding::Constant(0.0)))
            .collect();
        let diag = routed_update_batch(&mut self.nets, &mut self.opt, &mut embeddings, &batch, &mut self.update_rng);
        for (slot, e) in self.slots.iter_mut().zip(embeddings) {
            slot.embedding = e;
        }
        let diag = diag?;
        self.updates += 1;
        if !diag.accepted {
            self.rejected_updates += 1;
        }
        let z = self.z_values();
        self.diagnostics.record(self.updates, &diag, &z);
        Ok(Some(diag))
    }

    /// Greedy evaluation of every robot at its own embedding; appends curve rows.
    pub fn evaluate_all(&mut self) -> Result<Vec<Metrics>> {
        let idx = self.evals_done;
        self.evals_done += 1;
        let n = self.num_robots() as u64;
        let mut out = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let mut rng = seeded_stream(self.config.seed, STREAM_EVAL + idx * n + slot.id as u64);
            let z = slot.embedding.value()?;
            let m = evaluate_policy(&slot.spec, &self.nets, z, self.config.eval_episodes, &mut rng)?;
            self.curves.push(CurveRow { step: self.env_steps, robot_id: slot.id, ret: m.mean_return, success: m.success_rate, z });
            out.push(m);
        }
        Ok(out)
    }

    /// Parameters that must be restored on a non-finite abort.
    fn snapshot(&self) -> (SacNets, SacOptim, Vec<Embedding>) {
        (self.nets.clone(), self.opt.clone(), self.slots.iter().map(|s| s.embedding.clone()).collect())
    }

    fn params_finite(&self) -> bool {
        self.nets.is_finite() && self.slots.iter().all(|s| s.embedding.params().is_none_or(|p| p.is_finite()))
    }

    /// Alternates collection and routed updates until `total_steps`
    /// environment steps have been taken, evaluating every `eval_every`.
    pub fn run(&mut self) -> Result<TrainOutcome> {
        let n = self.num_robots() as u64;
        let mut last_good = self.snapshot();
        while self.env_steps < self.config.total_steps {
            let remaining = (self.config.total_steps - self.env_steps).div_ceil(n) as usize;
            let k = self.config.collect_steps.min(remaining);
            collect_parallel(&mut self.slots, &self.nets, k, self.config.warmup_steps, self.config.workers);
            if let Some(slot) = self.slots.iter().find(|s| s.fault.is_some()) {
                return Err(Error::Contract(format!(
                    "robot `{}` failed: {}",
                    slot.spec.name,
                    slot.fault.as_deref().unwrap_or("")
                )));
            }
            let before = self.env_steps;
            self.env_steps += k as u64 * n;

            let warm = self.slots.iter().all(|s| s.buffer.len() >= self.config.warmup_steps);
            if warm {
                for _ in 0..self.config.updates_per_round {
                    self.routed_update()?;
                }
            }
            if !self.params_finite() {
                let (nets, opt, emb) = last_good;
                self.nets = nets;
                self.opt = opt;
                for (s, e) in self.slots.iter_mut().zip(emb) {
                    s.embedding = e;
                }
                return Ok(TrainOutcome {
                    env_steps: self.env_steps,
                    updates: self.updates,
                    aborted: Some("non-finite parameters".into()),
                });
            }
            if self.env_steps / self.config.eval_every > before / self.config.eval_every {
                self.evaluate_all()?;
                last_good = self.snapshot();
            }
        }
        Ok(TrainOutcome { env_steps: self.env_steps, updates: self.updates, aborted: None })
    }

    pub fn curves_csv(&self) -> String {
        curves_to_csv(&self.curves)
    }
}
