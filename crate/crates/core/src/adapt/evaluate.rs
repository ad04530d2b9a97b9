use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multirobot::{run_episode, seeded_stream, RobotSpec};
use crate::sac::SacNets;

use super::metrics::{EpisodeResult, Metrics};

/// Stream offset for evaluation episodes; episode `e` draws from
/// `EVAL_STREAM + e` so results do not depend on scheduling.
pub const EVAL_STREAM: u64 = 1 << 40;

/// Runs `f(0..n)` on `workers` threads, or serially with one worker.
/// Output order always follows the index.
pub(crate) fn run_indexed<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Contract(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Per-episode results and their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub results: Vec<EpisodeResult>,
    pub metrics: Metrics,
}

/// Greedy (or sampled) rollouts of the policy at embedding `z`.
pub fn evaluate(
    nets: &SacNets,
    robot: &RobotSpec,
    z: f64,
    episodes: usize,
    greedy: bool,
    seed: u64,
    workers: usize,
) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    if !z.is_finite() {
        return Err(Error::Config(format!("embedding {z} is not finite")));
    }
    let results = run_indexed(episodes, workers, |e| {
        let mut env = robot.env.build()?;
        let mut rng = seeded_stream(seed, EVAL_STREAM + e as u64);
        run_episode(env.as_mut(), nets, z, greedy, &mut rng)
    })?;
    let metrics = Metrics::from_results(&results);
    Ok(Evaluation { results, metrics })
}

/// `episode,success,path_length,shortest_path,steps,return` rows.
pub fn episodes_to_csv(results: &[EpisodeResult]) -> String {
    let mut out = String::from("episode,success,path_length,shortest_path,steps,return\n");
    for (i, r) in results.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            r.success as u8, r.path_length, r.shortest_path, r.steps, r.ret
        ));
    }
    out
}
