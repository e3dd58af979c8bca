//! Per-building actor-critic agents on top of the shared spatial-temporal
//! encoder, the episode rollout driver and the training loop.

mod checkpoint;
mod policy;
mod rollout;
mod train;
mod update;

pub use checkpoint::{Checkpoint, CheckpointError, OptimizerState, CHECKPOINT_VERSION};
pub use policy::{ActionScale, Actor, Critic, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
pub use rollout::{rollout, Policy, Rollout, RolloutSpec, RuleBasedPolicy, ShieldCounts, UniformRandomPolicy};
pub use train::{
    calibrate_features, evaluate_model, evaluate_rule_based, EpisodeRecord, Model, NoiseSchedule, ScoredAction, StemsPolicy,
    TrainConfig, TrainSetup, Trainer, Trajectory,
};
pub use update::{actor_loss_grad, actor_update, advantage, critic_loss_grad, critic_update, normalize_advantages};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Encoder(#[from] crate::encoder::EncoderError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite parameters after episode {episode}")]
    NonFinite { episode: usize },
}
