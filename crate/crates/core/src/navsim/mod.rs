//! Planar legged-navigation simulator.
//!
//! Robots are discs moving on an occupancy grid. Velocity commands are turned
//! into body motion through a footstep controller plus per-robot lag, yaw
//! drift, slip and a fall hazard described by a [`RobotProfile`].

pub mod body;
pub mod episode;
pub mod grid;
pub mod profile;
pub mod reward;
pub mod sensor;
pub mod world;

pub use body::{body_step, fall_probability, footstep_target, wrap_angle, BodyState, FootTarget, StepEvents, STEP_DT};
pub use episode::{trace_to_csv, NavConfig, NavEnv, NavInfo, PreparedWorld, TraceRow};
pub use grid::{Cell, OccupancyGrid};
pub use profile::{RobotProfile, TEST_ROBOTS, TRAIN_ROBOTS};
pub use reward::compute_reward;
pub use sensor::{cast_ray, raycast_depth, ray_offsets};
pub use world::{generate_world, World, WorldConfig, PLANNING_MARGIN};
