use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::body::{body_step, wrap_angle, BodyState, StepEvents};
use super::profile::RobotProfile;
use super::reward::compute_reward;
use super::sensor::{raycast_depth, DEFAULT_FOV, DEFAULT_MAX_RANGE, DEFAULT_NUM_RAYS};
use super::world::{generate_world, World, WorldConfig};
use crate::env::{Env, EnvStep};
use crate::error::{Error, Result};
use crate::planner::{geodesic_field, GeodesicField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    pub world: WorldConfig,
    pub num_rays: usize,
    pub fov: f64,
    pub max_range: f64,
    pub success_radius: f64,
    pub max_steps: usize,
    pub k_geo: f64,
    /// Forward speed commanded by a unit action (m/s).
    pub v_scale: f64,
    /// Yaw rate commanded by a unit action (rad/s).
    pub omega_scale: f64,
    /// Number of distinct worlds episodes are drawn from; 0 draws a fresh
    /// world every episode.
    pub world_pool: u64,
    /// Seed offset for pooled worlds.
    pub world_seed: u64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            num_rays: DEFAULT_NUM_RAYS,
            fov: DEFAULT_FOV,
            max_range: DEFAULT_MAX_RANGE,
            success_radius: 0.36,
            max_steps: 150,
            k_geo: 1.0,
            v_scale: 0.5,
            omega_scale: 1.0,
            world_pool: 0,
            world_seed: 0,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        if self.num_rays == 0 || !(self.fov > 0.0) || !(self.max_range > 0.0) {
            return Err(Error::Config("sensor settings invalid".into()));
        }
        if !(self.success_radius > 0.0) || self.max_steps == 0 {
            return Err(Error::Config("episode settings invalid".into()));
        }
        if !(self.v_scale > 0.0 && self.omega_scale > 0.0) {
            return Err(Error::Config("command scales must be positive".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.num_rays + 3
    }
}

/// Per-step diagnostics beyond the generic [`EnvStep`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NavInfo {
    pub events: StepEvents,
    pub d_geo_prev: f64,
    pub d_geo_cur: f64,
    pub v_cmd: f64,
    pub omega_cmd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v_cmd: f64,
    pub omega_cmd: f64,
    pub reward: f64,
    pub collided: bool,
    pub fell: bool,
    pub success: bool,
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("step,x,y,heading,v_cmd,omega_cmd,reward,collided,fell,success\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.x,
            r.y,
            r.heading,
            r.v_cmd,
            r.omega_cmd,
            r.reward,
            r.collided as u8,
            r.fell as u8,
            r.success as u8
        );
    }
    out
}

/// A world together with the distance field for one robot's body radius.
#[derive(Debug, Clone)]
pub struct PreparedWorld {
    pub world: World,
    pub field: GeodesicField,
    /// Geodesic distance from the start pose to the goal.
    pub shortest_path: f64,
}

impl PreparedWorld {
    pub fn new(world: World, body_radius: f64) -> Result<Self> {
        let cspace = world.grid.inflate(body_radius);
        let goal_cell = cspace
            .cell_of(world.goal.0, world.goal.1)
            .ok_or_else(|| Error::Contract("goal outside grid".into()))?;
        let field = geodesic_field(&cspace, goal_cell)?;
        let shortest_path = field.distance_at(world.start.0, world.start.1);
        if !shortest_path.is_finite() {
            return Err(Error::Generation("start cannot reach goal for this body radius".into()));
        }
        Ok(Self { world, field, shortest_path })
    }
}

/// PointGoal navigation episode for one robot profile.
///
/// Observation layout: `num_rays` depths scaled to `[0, 1]`, goal distance
/// divided by `max_range` (capped at 2), then cosine and sine of the goal
/// bearing relative to the heading.
pub struct NavEnv {
    profile: RobotProfile,
    config: NavConfig,
    cache: HashMap<u64, Arc<PreparedWorld>>,
    current: Option<Arc<PreparedWorld>>,
    body: BodyState,
    d_geo: f64,
    done: bool,
    last_info: NavInfo,
    trace: Option<Vec<TraceRow>>,
}

impl NavEnv {
    pub fn new(profile: RobotProfile, config: NavConfig) -> Result<Self> {
        profile.validate()?;
        config.validate()?;
        let body = BodyState::new(0.0, 0.0, 0.0, profile.num_legs);
        Ok(Self {
            profile,
            config,
            cache: HashMap::new(),
            current: None,
            body,
            d_geo: 0.0,
            done: true,
            last_info: NavInfo::default(),
            trace: None,
        })
    }

    pub fn profile(&self) -> &RobotProfile {
        &self.profile
    }

    pub fn config(&self) -> &NavConfig {
        &self.config
    }

    pub fn body(&self) -> &BodyState {
        &self.body
    }

    pub fn world(&self) -> Option<&PreparedWorld> {
        self.current.as_deref()
    }

    pub fn last_info(&self) -> NavInfo {
        self.last_info
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Starts keeping a per-step trace (cleared on every reset).
    pub fn record_trace(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn trace(&self) -> &[TraceRow] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Places the body anywhere in the current world, keeping the episode live.
    pub fn set_body(&mut self, body: BodyState) {
        self.d_geo = self.geodesic_at(body.x, body.y, self.d_geo);
        self.body = body;
        self.done = false;
    }

    fn prepared(&mut self, seed: u64) -> Result<Arc<PreparedWorld>> {
        if let Some(w) = self.cache.get(&seed) {
            return Ok(w.clone());
        }
        let world = generate_world(seed, &self.config.world)?;
        let prepared = Arc::new(PreparedWorld::new(world, self.profile.body_radius)?);
        if self.config.world_pool > 0 {
            self.cache.insert(seed, prepared.clone());
        }
        Ok(prepared)
    }

    /// Starts an episode in the world generated from `seed`.
    pub fn reset_world(&mut self, seed: u64) -> Result<Vec<f64>> {
        let prepared = self.prepared(seed)?;
        self.reset_prepared(prepared);
        Ok(self.observation())
    }

    pub fn reset_prepared(&mut self, prepared: Arc<PreparedWorld>) {
        let (x, y, heading) = prepared.world.start;
        self.body = BodyState::new(x, y, heading, self.profile.num_legs);
        self.d_geo = prepared.shortest_path;
        self.current = Some(prepared);
        self.done = false;
        self.last_info = NavInfo::default();
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
    }

    fn geodesic_at(&self, x: f64, y: f64, fallback: f64) -> f64 {
        match &self.current {
            Some(w) => {
                let d = w.field.distance_at(x, y);
                if d.is_finite() { d } else { fallback }
            }
            None => fallback,
        }
    }

    pub fn goal_distance(&self) -> f64 {
        match &self.current {
            Some(w) => ((w.world.goal.0 - self.body.x).powi(2) + (w.world.goal.1 - self.body.y).powi(2)).sqrt(),
            None => f64::INFINITY,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        let c = &self.config;
        let Some(w) = &self.current else {
            return vec![0.0; c.obs_dim()];
        };
        let mut obs: Vec<f64> = raycast_depth(
            &w.world.grid,
            (self.body.x, self.body.y, self.body.heading),
            c.num_rays,
            c.fov,
            c.max_range,
        )
        .into_iter()
        .map(|d| d / c.max_range)
        .collect();
        let (dx, dy) = (w.world.goal.0 - self.body.x, w.world.goal.1 - self.body.y);
        let r = (dx * dx + dy * dy).sqrt();
        let theta = wrap_angle(dy.atan2(dx) - self.body.heading);
        obs.push((r / c.max_range).min(2.0));
        obs.push(theta.cos());
        obs.push(theta.sin());
        obs
    }

    /// Applies a raw `(v_des, ω_des)` command in physical units.
    pub fn step_command(&mut self, v_des: f64, omega_des: f64, rng: &mut dyn RngCore) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Contract("step called on a finished navigation episode".into()));
        }
        let w = self
            .current
            .clone()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        let (body, events) = body_step(&self.body, v_des, omega_des, &self.profile, &w.world.grid, rng);
        self.body = body;
        let d_prev = self.d_geo;
        let d_cur = self.geodesic_at(self.body.x, self.body.y, d_prev);
        self.d_geo = d_cur;
        let success = !events.fell && self.goal_distance() < self.config.success_radius;
        let reward = compute_reward(d_prev, d_cur, events.collided, events.fell, success, self.config.k_geo);
        let timeout = self.body.step_index >= self.config.max_steps;
        let terminal = success || events.fell;
        self.done = terminal || timeout;
        self.last_info = NavInfo {
            events,
            d_geo_prev: d_prev,
            d_geo_cur: d_cur,
            v_cmd: v_des.clamp(-self.profile.v_max, self.profile.v_max),
            omega_cmd: omega_des.clamp(-self.profile.omega_max, self.profile.omega_max),
        };
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRow {
                step: self.body.step_index,
                x: self.body.x,
                y: self.body.y,
                heading: self.body.heading,
                v_cmd: self.last_info.v_cmd,
                omega_cmd: self.last_info.omega_cmd,
                reward,
                collided: events.collided,
                fell: events.fell,
                success,
            });
        }
        Ok(EnvStep {
            obs: self.observation(),
            reward,
            done: self.done,
            terminal,
            success,
            path_length: self.body.path_length_accum,
            shortest_path: w.shortest_path,
        })
    }
}

impl Env for NavEnv {
    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn act_dim(&self) -> usize {
        2
    }

    /// Draws a world seed from `rng` (from the pool if one is configured).
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        loop {
            let seed = if self.config.world_pool > 0 {
                self.config.world_seed + rng.random_range(0..self.config.world_pool)
            } else {
                rng.next_u64()
            };
            if let Ok(obs) = self.reset_world(seed) {
                return obs;
            }
        }
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<EnvStep> {
        if action.len() != 2 {
            return Err(Error::Shape(format!("navigation action has {} entries, expected 2", action.len())));
        }
        let a0 = if action[0].is_finite() { action[0].clamp(-1.0, 1.0) } else { 0.0 };
        let a1 = if action[1].is_finite() { action[1].clamp(-1.0, 1.0) } else { 0.0 };
        self.step_command(a0 * self.config.v_scale, a1 * self.config.omega_scale, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(profile: RobotProfile) -> NavEnv {
        NavEnv::new(profile, NavConfig::default()).unwrap()
    }

    #[test]
    fn observation_layout() {
        let mut e = env(RobotProfile::idealized());
        let obs = e.reset_world(3).unwrap();
        assert_eq!(obs.len(), 35);
        assert!(obs[..32].iter().all(|&d| (0.0..=1.0).contains(&d)));
        let (c, s) = (obs[33], obs[34]);
        assert!((c * c + s * s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_goal_succeeds() {
        let mut e = env(RobotProfile::idealized());
        e.reset_world(11).unwrap();
        let g = e.world().unwrap().world.goal;
        let mut b = e.body().clone();
        b.x = g.0 - 0.1;
        b.y = g.1;
        e.set_body(b);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = e.step_command(0.0, 0.0, &mut rng).unwrap();
        assert!(s.done && s.success && s.terminal);
        assert!(s.reward >= 10.0 - 1e-9);
        assert!(matches!(e.step_command(0.0, 0.0, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn time_limit_ends_without_success() {
        let mut e = env(RobotProfile::idealized());
        e.reset_world(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..150 {
            let s = e.step_command(0.0, 0.0, &mut rng).unwrap();
            assert_eq!(s.done, i == 149);
            assert!(!s.success && !s.terminal);
        }
    }

    #[test]
    fn fall_terminates_with_penalty() {
        let mut p = RobotProfile::builtin("daisy4").unwrap();
        p.fall_gain = 100.0;
        let mut e = env(p);
        e.reset_world(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = e.step_command(0.5, 0.0, &mut rng).unwrap();
        assert!(e.last_info().events.fell);
        assert!(s.done && s.terminal && !s.success);
        assert!(s.reward <= -5.0 + 0.2);
    }

    #[test]
    fn trace_export() {
        let mut e = env(RobotProfile::idealized());
        e.record_trace(true);
        e.reset_world(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..3 {
            e.step(&[0.5, 0.2], &mut rng).unwrap();
        }
        let csv = trace_to_csv(e.trace());
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("step,x,y,heading"));
    }

    #[test]
    fn pooled_reset_reuses_worlds() {
        let cfg = NavConfig { world_pool: 2, ..Default::default() };
        let mut e = NavEnv::new(RobotProfile::idealized(), cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..6 {
            e.reset(&mut rng);
        }
        assert!(e.cache.len() <= 2);
    }
}
