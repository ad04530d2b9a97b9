//! Dynamics-aware hierarchical navigation for heterogeneous legged robots.
//!
//! A universal soft actor-critic policy is shared across robots and
//! specialised by a learned one-dimensional embedding per robot. The crate
//! also contains the environments used to exercise it: a parameterised
//! cart-pole family and a planar legged-navigation simulator with a
//! footstep-level controller.

pub mod adapt;
pub mod cartpole;
pub mod checkpoint;
pub mod config;
pub mod diffnet;
pub mod env;
pub mod error;
pub mod multirobot;
pub mod navsim;
pub mod planner;
pub mod sac;

pub use error::{Error, Result};
