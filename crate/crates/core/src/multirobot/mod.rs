//! Universal policy training across several robots: per-robot embedding
//! networks, routed gradient updates and the collection/update loop.

mod routed;
mod spec;
mod trainer;
mod znet;

pub use routed::{routed_update_batch, RoutedZ};
pub use spec::{EnvSpec, Method, RobotSpec};
pub use trainer::{
    collect_parallel, curves_to_csv, evaluate_policy, fixed_z_value, run_episode, seeded_stream, CollectStats,
    CurveRow, RobotSlot, TrainConfig, TrainOutcome, Trainer,
};
pub use znet::{z_forward, Embedding, ZNetwork, Z_HIDDEN};
