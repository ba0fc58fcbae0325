//! Proximal policy optimization with generalized advantage estimation, a
//! combined clipped-surrogate and adaptive-KL objective, damage-randomized
//! rollouts and a staged damage curriculum.

mod curriculum;
mod gae;
mod loss;
mod policy;
mod rollout;
mod train;

pub use curriculum::{ClassMix, Curriculum, Stage, StagePlan};
pub use gae::{compute_gae, normalize_advantages, GaeConfig};
pub use loss::{
    adapt_kl, adapt_learning_rate, clipped_surrogate, policy_ratio, ppo_loss, ppo_loss_and_grad, value_loss,
    value_loss_and_grad, PolicyLoss, PolicyMinibatch, BETA_MAX, BETA_MIN,
};
pub use policy::{
    gaussian_kl, gaussian_log_prob, PolicyNet, ValueNet, DEFAULT_HIDDEN, LOG_STD_INIT, LOG_STD_MAX, LOG_STD_MIN,
};
pub use rollout::{collect_rollouts, EpisodeSummary, ObservationMode, RolloutBatch, RolloutRequest};
pub use train::{init_networks, train, train_from, IterationMetrics, PpoConfig, TrainSetup, Trained};
