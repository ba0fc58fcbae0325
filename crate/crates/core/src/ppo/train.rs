use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::curriculum::{Curriculum, Stage};
use super::gae::{normalize_advantages, GaeConfig};
use super::loss::{adapt_kl, adapt_learning_rate, ppo_loss_and_grad, value_loss_and_grad, PolicyMinibatch};
use super::policy::{gaussian_kl, PolicyNet, ValueNet, DEFAULT_HIDDEN};
use super::rollout::{collect_rollouts, ObservationMode, RolloutBatch, RolloutRequest};
use crate::damage::DamageSpace;
use crate::error::{config_err, Error, Result};
use crate::nn::{adam_update, AdamState, Parameterized, Tensor2};
use crate::rng::{derive_seed, derived_rng};
use crate::sim::{RewardConfig, RobotSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub kl_target: f64,
    pub beta_init: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub batch_timesteps: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub value_lr: f64,
    pub workers: usize,
    pub hidden: Vec<usize>,
}

impl PpoConfig {
    pub fn for_robot(spec: &RobotSpec) -> Self {
        Self {
            clip: 0.2,
            kl_target: 0.01,
            beta_init: 1.0,
            epochs: 10,
            minibatch_size: 256,
            batch_timesteps: if spec.n_legs == 6 { 4096 } else { 2048 },
            lr_init: 3e-4,
            lr_min: 1e-5,
            lr_max: 1e-2,
            value_lr: 1e-3,
            workers: 4,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.kl_target > 0.0 && self.beta_init > 0.0) {
            return Err(config_err("clip, kl target and beta must be positive"));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.batch_timesteps == 0 || self.workers == 0 {
            return Err(config_err("epochs, minibatch, batch and workers must be positive"));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_init && self.lr_init <= self.lr_max) {
            return Err(config_err("learning rate must satisfy 0 < min ≤ init ≤ max"));
        }
        if self.value_lr <= 0.0 {
            return Err(config_err("value learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub stage: Stage,
    pub mean_episode_reward: f64,
    pub mean_forward_reward: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub beta: f64,
    pub lr: f64,
}

impl IterationMetrics {
    pub const CSV_HEADER: &'static str =
        "iteration,stage,mean_episode_reward,mean_forward_reward,mean_kl,clip_fraction,beta,lr";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iteration,
            self.stage.label(),
            self.mean_episode_reward,
            self.mean_forward_reward,
            self.mean_kl,
            self.clip_fraction,
            self.beta,
            self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainSetup<'a> {
    pub spec: &'a RobotSpec,
    pub reward: RewardConfig,
    pub curriculum: &'a Curriculum,
    pub mode: ObservationMode,
    pub ppo: &'a PpoConfig,
    pub gae: GaeConfig,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub metrics: Vec<IterationMetrics>,
    pub beta: f64,
    pub lr: f64,
}

const STREAM_INIT: u64 = 0;
const STREAM_ROLLOUT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

/// Fresh policy and value networks for `setup`.
pub fn init_networks(setup: &TrainSetup<'_>) -> (PolicyNet, ValueNet) {
    let obs_dim = setup.mode.policy_obs_dim(setup.spec);
    let mut rng = derived_rng(setup.seed, STREAM_INIT);
    let policy = PolicyNet::new(obs_dim, setup.spec.action_dim(), &setup.ppo.hidden, &mut rng);
    let value = ValueNet::new(obs_dim, &setup.ppo.hidden, &mut rng);
    (policy, value)
}

fn gather(t: &Tensor2, idx: &[usize]) -> Tensor2 {
    let mut data = Vec::with_capacity(idx.len() * t.cols());
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor2::from_vec(idx.len(), t.cols(), data).expect("gathered shape")
}

fn mean_kl(policy: &PolicyNet, batch: &RolloutBatch) -> Result<f64> {
    let means = policy.mean_batch(&batch.obs)?;
    let total: f64 = (0..batch.len())
        .map(|i| gaussian_kl(batch.means.row(i), &batch.log_std, means.row(i), &policy.log_std))
        .sum();
    Ok(total / batch.len() as f64)
}

fn ensure_finite<M: Parameterized>(model: &M, what: &str, iteration: usize) -> Result<()> {
    if model.params_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} parameters after iteration {iteration}")))
    }
}

/// Trains from freshly initialized networks through every curriculum stage.
pub fn train(setup: &TrainSetup<'_>) -> Result<Trained> {
    let (policy, value) = init_networks(setup);
    train_from(setup, policy, value)
}

/// Trains the given networks through every curriculum stage.
pub fn train_from(setup: &TrainSetup<'_>, mut policy: PolicyNet, mut value: ValueNet) -> Result<Trained> {
    let cfg = setup.ppo;
    cfg.validate()?;
    setup.gae.validate()?;
    setup.curriculum.validate(&DamageSpace::for_limbs(setup.spec.n_legs))?;
    let mut policy_opt = AdamState::for_params(&policy.param_slices(), cfg.lr_init);
    let mut value_opt = AdamState::for_params(&value.param_slices(), cfg.value_lr);
    let mut beta = cfg.beta_init;
    let mut lr = cfg.lr_init;
    let mut previous: Option<(Tensor2, Vec<f64>)> = None;
    let mut metrics = Vec::with_capacity(setup.curriculum.total_iterations());

    for (iteration, plan) in setup.curriculum.schedule().enumerate() {
        let req = RolloutRequest {
            spec: setup.spec,
            reward: setup.reward,
            mix: plan.mix,
            mode: setup.mode,
            batch_timesteps: cfg.batch_timesteps,
            workers: cfg.workers,
            gae: setup.gae,
            seed: derive_seed(derive_seed(setup.seed, STREAM_ROLLOUT), iteration as u64),
        };
        let batch = collect_rollouts(&policy, &value, &req)?;
        let mut advantages = batch.advantages.clone();
        normalize_advantages(&mut advantages);
        let mut shuffle_rng = derived_rng(derive_seed(setup.seed, STREAM_SHUFFLE), iteration as u64);
        let n = batch.len();
        let mut order: Vec<usize> = (0..n).collect();
        let (mut clip_sum, mut clip_count) = (0.0, 0usize);

        policy_opt.learning_rate = lr;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                let mb = PolicyMinibatch {
                    obs: gather(&batch.obs, chunk),
                    actions: gather(&batch.actions, chunk),
                    old_log_probs: chunk.iter().map(|&i| batch.log_probs[i]).collect(),
                    old_means: gather(&batch.means, chunk),
                    old_log_std: batch.log_std.clone(),
                    advantages: chunk.iter().map(|&i| advantages[i]).collect(),
                };
                let (loss, grads) = ppo_loss_and_grad(&policy, &mb, beta, cfg.clip)?;
                adam_update(&mut policy.param_slices_mut(), &grads, &mut policy_opt)?;
                policy.clamp_log_std();
                clip_sum += loss.clip_fraction;
                clip_count += 1;
            }
        }
        ensure_finite(&policy, "policy", iteration)?;

        // Value regression on the current batch plus the one before it.
        let (value_obs, value_targets) = match previous.take() {
            Some((prev_obs, prev_ret)) => {
                let mut data = batch.obs.data().to_vec();
                data.extend_from_slice(prev_obs.data());
                let rows = batch.obs.rows() + prev_obs.rows();
                let mut targets = batch.returns.clone();
                targets.extend_from_slice(&prev_ret);
                (Tensor2::from_vec(rows, batch.obs.cols(), data)?, targets)
            }
            None => (batch.obs.clone(), batch.returns.clone()),
        };
        let mut value_order: Vec<usize> = (0..value_targets.len()).collect();
        for _ in 0..cfg.epochs {
            value_order.shuffle(&mut shuffle_rng);
            for chunk in value_order.chunks(cfg.minibatch_size) {
                let obs = gather(&value_obs, chunk);
                let targets: Vec<f64> = chunk.iter().map(|&i| value_targets[i]).collect();
                let (_, grads) = value_loss_and_grad(&value, &obs, &targets)?;
                adam_update(&mut value.param_slices_mut(), &grads, &mut value_opt)?;
            }
        }
        ensure_finite(&value, "value", iteration)?;
        previous = Some((batch.obs.clone(), batch.returns.clone()));

        let kl = mean_kl(&policy, &batch)?;
        beta = adapt_kl(beta, kl, cfg.kl_target);
        lr = adapt_learning_rate(lr, kl, cfg.kl_target, cfg.lr_min, cfg.lr_max);
        let (mean_episode_reward, mean_forward_reward) = batch.episode_means();
        metrics.push(IterationMetrics {
            iteration,
            stage: plan.stage,
            mean_episode_reward,
            mean_forward_reward,
            mean_kl: kl,
            clip_fraction: if clip_count > 0 { clip_sum / clip_count as f64 } else { 0.0 },
            beta,
            lr,
        });
    }
    Ok(Trained { policy, value, metrics, beta, lr })
}
