use rand::RngCore;

use super::metrics::EpisodeResult;
use crate::error::{Error, Result};
use crate::navsim::{NavEnv, PLANNING_MARGIN};
use crate::planner::{astar_path, cells_to_points, nearest_free, oracle_policy, smooth_path};

/// Runs one episode in world `world_seed` with the map-based A* pure-pursuit
/// oracle. The path is planned once, for the robot's body radius, and never
/// adjusted for lag, drift or falls.
pub fn oracle_episode(env: &mut NavEnv, world_seed: u64, rng: &mut dyn RngCore) -> Result<EpisodeResult> {
    env.reset_world(world_seed)?;
    let prepared = env.world().expect("reset sets a world").clone();
    let grid = &prepared.world.grid;
    let cspace = grid.inflate(env.profile().body_radius + PLANNING_MARGIN);
    let (sx, sy, _) = prepared.world.start;
    let (gx, gy) = prepared.world.goal;
    let locate = |x: f64, y: f64| cspace.cell_of(x, y).and_then(|c| nearest_free(&cspace, c));
    let start = locate(sx, sy).ok_or_else(|| Error::Contract("start outside free space".into()))?;
    let goal = locate(gx, gy).ok_or_else(|| Error::Contract("goal outside free space".into()))?;
    let plan = astar_path(&cspace, start, goal)?;
    let cells = plan
        .path
        .ok_or_else(|| Error::Generation(format!("world {world_seed} has no path for this robot")))?;
    let mut points = cells_to_points(&cspace, &cells);
    points[0] = (sx, sy);
    *points.last_mut().unwrap() = (gx, gy);
    let path = smooth_path(&cspace, &points);

    let mut ret = 0.0;
    loop {
        let (v, w) = oracle_policy(&path, env.body(), env.profile());
        let s = env.step_command(v, w, rng)?;
        ret += s.reward;
        if s.done {
            return Ok(EpisodeResult {
                success: s.success,
                path_length: s.path_length,
                shortest_path: s.shortest_path,
                steps: env.body().step_index,
                ret,
            });
        }
    }
}
