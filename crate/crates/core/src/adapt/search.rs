use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multirobot::{run_episode, seeded_stream, RobotSpec};
use crate::sac::SacNets;

use super::evaluate::run_indexed;
use super::metrics::{mean_std, EpisodeResult};

pub const DEFAULT_GRID_POINTS: usize = 21;
pub const DEFAULT_EPISODES_PER_Z: usize = 5;

/// Stream offset for search episodes. Episode `e` uses the same stream at
/// every grid point, so all candidates face the same starts.
pub const SEARCH_STREAM: u64 = 1 << 41;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub grid_points: usize,
    pub episodes_per_z: usize,
    /// Mean actions when true; sampled actions otherwise.
    pub greedy: bool,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            episodes_per_z: DEFAULT_EPISODES_PER_Z,
            greedy: true,
            seed: 0,
            workers: 1,
        }
    }
}

/// `points` evenly spaced values covering `[−1, 1]` inclusive.
pub fn z_grid(points: usize) -> Result<Vec<f64>> {
    match points {
        0 => Err(Error::Config("grid needs at least one point".into())),
        1 => Ok(vec![0.0]),
        _ => Ok((0..points)
            .map(|i| if i + 1 == points { 1.0 } else { -1.0 + 2.0 * i as f64 / (points - 1) as f64 })
            .collect()),
    }
}

/// Outcome of a grid search over the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptReport {
    pub grid: Vec<f64>,
    /// `episodes[k][e]` is episode `e` at `grid[k]`.
    pub episodes: Vec<Vec<EpisodeResult>>,
    pub mean_return: Vec<f64>,
    pub std_return: Vec<f64>,
    pub z_star: f64,
    pub episodes_used: usize,
    pub env_steps_used: u64,
}

impl AdaptReport {
    pub fn from_episodes(grid: Vec<f64>, episodes: Vec<Vec<EpisodeResult>>) -> Result<Self> {
        if grid.is_empty() || grid.len() != episodes.len() {
            return Err(Error::Shape("grid and episode lists disagree".into()));
        }
        let stats: Vec<(f64, f64)> = episodes
            .iter()
            .map(|eps| mean_std(&eps.iter().map(|r| r.ret).collect::<Vec<_>>()))
            .collect();
        let mean_return: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let z_star = grid[argmax_first(&mean_return)];
        Ok(Self {
            episodes_used: episodes.iter().map(Vec::len).sum(),
            env_steps_used: episodes.iter().flatten().map(|r| r.steps as u64).sum(),
            std_return: stats.iter().map(|s| s.1).collect(),
            mean_return,
            grid,
            episodes,
            z_star,
        })
    }

    pub fn best_index(&self) -> usize {
        argmax_first(&self.mean_return)
    }

    /// `z,episode,return,steps,success` with one row per (z, episode).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,episode,return,steps,success\n");
        for (z, eps) in self.grid.iter().zip(&self.episodes) {
            for (e, r) in eps.iter().enumerate() {
                let _ = writeln!(out, "{z},{e},{},{},{}", r.ret, r.steps, r.success as u8);
            }
        }
        out
    }

    /// `z,mean_return,std_return,success_rate` with one row per grid point.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("z,mean_return,std_return,success_rate\n");
        for k in 0..self.grid.len() {
            let eps = &self.episodes[k];
            let succ = eps.iter().filter(|r| r.success).count() as f64 / eps.len().max(1) as f64;
            let _ = writeln!(out, "{},{},{},{}", self.grid[k], self.mean_return[k], self.std_return[k], succ);
        }
        out
    }
}

/// Index of the largest value; ties and NaNs resolve to the earliest index.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Grid search with an arbitrary rollout `f(z, episode)`. The grid must lie
/// in `[−1, 1]`; grid points run on `workers` threads.
pub fn z_grid_search_with<F>(grid: &[f64], episodes_per_z: usize, workers: usize, rollout: F) -> Result<AdaptReport>
where
    F: Fn(f64, usize) -> Result<EpisodeResult> + Sync + Send,
{
    if episodes_per_z == 0 {
        return Err(Error::Config("episodes_per_z must be positive".into()));
    }
    if let Some(z) = grid.iter().find(|z| !(-1.0..=1.0).contains(*z)) {
        return Err(Error::Config(format!("grid value {z} lies outside [-1, 1]")));
    }
    let episodes = run_indexed(grid.len(), workers, |k| {
        (0..episodes_per_z).map(|e| rollout(grid[k], e)).collect::<Result<Vec<_>>>()
    })?;
    AdaptReport::from_episodes(grid.to_vec(), episodes)
}

/// Evaluates the shared policy on `robot` at each grid value and picks the
/// embedding with the highest mean return.
pub fn z_grid_search(nets: &SacNets, robot: &RobotSpec, config: &SearchConfig) -> Result<AdaptReport> {
    let grid = z_grid(config.grid_points)?;
    z_grid_search_with(&grid, config.episodes_per_z, config.workers, |z, e| {
        let mut env = robot.env.build()?;
        let mut rng = seeded_stream(config.seed, SEARCH_STREAM + e as u64);
        run_episode(env.as_mut(), nets, z, config.greedy, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(ret: f64) -> EpisodeResult {
        EpisodeResult { success: false, path_length: 0.0, shortest_path: 0.0, steps: 1, ret }
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        let g = z_grid(21).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[20], 1.0);
        assert!((g[13] - 0.3).abs() < 1e-12);
        assert_eq!(z_grid(11).unwrap()[1], -0.8);
        assert!(z_grid(0).is_err());
    }

    #[test]
    fn ties_go_to_smallest_z() {
        let grid = z_grid(21).unwrap();
        let r = z_grid_search_with(&grid, 3, 1, |_, _| Ok(ep(1.5))).unwrap();
        assert_eq!(r.z_star, -1.0);
        assert_eq!(r.episodes_used, 63);
        assert_eq!(r.env_steps_used, 63);
    }

    #[test]
    fn rejects_out_of_range_grid() {
        assert!(z_grid_search_with(&[-1.0, 1.5], 1, 1, |_, _| Ok(ep(0.0))).is_err());
    }

    #[test]
    fn csv_rows() {
        let grid = z_grid(5).unwrap();
        let r = z_grid_search_with(&grid, 2, 1, |z, e| Ok(ep(z + e as f64))).unwrap();
        assert_eq!(r.to_csv().lines().count(), 1 + 10);
        assert_eq!(r.sweep_csv().lines().count(), 1 + 5);
        assert_eq!(r.z_star, 1.0);
    }
}
