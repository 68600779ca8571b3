//! Proximal policy optimisation for the single steering action.

pub mod adam;
pub mod buffer;
pub mod mlp;
pub mod policy;
pub mod ppo;
pub mod train;

pub use adam::Adam;
pub use buffer::{compute_gae, normalize, RolloutBuffer};
pub use mlp::Mlp;
pub use policy::{squashed_log_prob, Policy, Sample};
pub use ppo::{clip_grad_norm, minibatch_loss, ppo_update, TrainConfig, UpdateMetrics};
pub use train::{moving_average, train, Checkpoint, Collector, EpisodeStat, MetricsRow, TrainOutcome};

use crate::env::EnvError;

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss in epoch {epoch}, minibatch {batch} (policy {policy_loss}, value {value_loss})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        policy_loss: f64,
        value_loss: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
