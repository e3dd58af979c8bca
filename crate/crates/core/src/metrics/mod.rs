//! Per-step rewards, episode-level evaluation metrics and the rule-based
//! controller used as the normalization anchor.

mod baseline;
mod episode;
mod reward;

pub use baseline::{rule_based_policy, RuleSchedule};
pub use episode::{
    episode_metrics, normalize, violation_flags, EpisodeLog, EpisodeMetrics, MetricsError, MetricsSpec,
    NormalizedMetrics, StepLog, ViolationFamilies, ViolationFlags, METRIC_NAMES,
};
pub use reward::{r_comfort, r_economic, r_renewable, r_stability, reward, RewardComponents, RewardWeights, SystemSnapshot};
