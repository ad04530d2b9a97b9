//! Test-time adaptation, evaluation metrics and baselines.

mod evaluate;
mod finetune;
mod informed;
mod matrix;
mod metrics;
mod oracle;
mod search;

pub use evaluate::{episodes_to_csv, evaluate, Evaluation, EVAL_STREAM};
pub use finetune::{no_z_finetune, FinetuneConfig, FinetuneOutcome};
pub use informed::{informed_raw, informed_z_input, normalize_descriptor};
pub use matrix::{cross_robot_matrix, TrainedPolicy, TransferMatrix, MATRIX_EPISODES};
pub use metrics::{mean_std, median, spl, EpisodeResult, Metrics};
pub use oracle::oracle_episode;
pub use search::{
    z_grid, z_grid_search, z_grid_search_with, AdaptReport, SearchConfig, DEFAULT_EPISODES_PER_Z,
    DEFAULT_GRID_POINTS, SEARCH_STREAM,
};
