use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::OccupancyGrid;
use crate::error::{Error, Result};
use crate::planner::geodesic_field;

/// Extra margin added to radii when building configuration-space grids, so
/// that paths keep a little distance from walls.
pub const PLANNING_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Side length of the square world (m).
    pub size: f64,
    pub resolution: f64,
    /// Target fraction of occupied interior cells, in `[0, 0.3]`.
    pub obstacle_density: f64,
    /// Free radius required around start and goal (m).
    pub clearance: f64,
    pub min_goal_distance: f64,
    pub max_goal_distance: f64,
    pub min_obstacle_side: f64,
    pub max_obstacle_side: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            size: 10.0,
            resolution: 0.1,
            obstacle_density: 0.1,
            clearance: 0.36,
            min_goal_distance: 1.0,
            max_goal_distance: 7.0,
            min_obstacle_side: 0.3,
            max_obstacle_side: 1.5,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.3).contains(&self.obstacle_density) {
            return Err(Error::Config(format!(
                "obstacle_density {} outside [0, 0.3]",
                self.obstacle_density
            )));
        }
        if !(self.resolution > 0.0 && self.size >= 3.0 * self.resolution) {
            return Err(Error::Config("world size/resolution invalid".into()));
        }
        if !(self.clearance >= 0.0) {
            return Err(Error::Config("clearance must be non-negative".into()));
        }
        if !(self.min_goal_distance >= 0.0 && self.max_goal_distance >= self.min_goal_distance) {
            return Err(Error::Config("goal distance range invalid".into()));
        }
        if !(self.min_obstacle_side > 0.0 && self.max_obstacle_side >= self.min_obstacle_side) {
            return Err(Error::Config("obstacle side range invalid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub grid: OccupancyGrid,
    /// `(x, y, heading)`.
    pub start: (f64, f64, f64),
    pub goal: (f64, f64),
    /// Shortest clearance-respecting distance from start to goal.
    pub geodesic: f64,
}

const MAX_ATTEMPTS: usize = 1000;
const STARTS_PER_GOAL: usize = 20;

/// Random closed world with axis-aligned rectangular obstacles and a
/// reachable start/goal pair.
pub fn generate_world(seed: u64, config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (config.size / config.resolution).round() as usize;
    let mut grid = OccupancyGrid::closed(cells, cells, config.resolution)?;

    let mut guard = 0;
    while grid.interior_density() < config.obstacle_density && guard < 10_000 {
        guard += 1;
        let w = rng.random_range(config.min_obstacle_side..=config.max_obstacle_side);
        let h = rng.random_range(config.min_obstacle_side..=config.max_obstacle_side);
        if w >= config.size || h >= config.size {
            continue;
        }
        let x0 = rng.random_range(0.0..config.size - w);
        let y0 = rng.random_range(0.0..config.size - h);
        grid.fill_rect(x0, y0, x0 + w, y0 + h);
    }

    let cspace = grid.inflate(config.clearance + PLANNING_MARGIN);
    let lo = config.resolution;
    let hi = config.size - config.resolution;
    let mut attempts = 0;
    while attempts < MAX_ATTEMPTS {
        attempts += 1;
        let gx = rng.random_range(lo..hi);
        let gy = rng.random_range(lo..hi);
        let Some(gc) = cspace.cell_of(gx, gy) else { continue };
        if cspace.occupied(gc.0, gc.1) || grid.disc_collides(gx, gy, config.clearance) {
            continue;
        }
        let field = geodesic_field(&cspace, gc)?;
        for _ in 0..STARTS_PER_GOAL {
            attempts += 1;
            let sx = rng.random_range(lo..hi);
            let sy = rng.random_range(lo..hi);
            let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            if grid.disc_collides(sx, sy, config.clearance) {
                continue;
            }
            let d = field.distance_at(sx, sy);
            if d.is_finite() && d >= config.min_goal_distance && d <= config.max_goal_distance {
                return Ok(World { grid, start: (sx, sy, heading), goal: (gx, gy), geodesic: d });
            }
        }
    }
    Err(Error::Generation(format!(
        "no valid start/goal placement for seed {seed} after {MAX_ATTEMPTS} attempts"
    )))
}
