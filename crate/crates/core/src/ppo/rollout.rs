use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curriculum::ClassMix;
use super::gae::{compute_gae, GaeConfig};
use super::policy::{PolicyNet, ValueNet};
use crate::damage::DamageSpace;
use crate::error::{config_err, Result};
use crate::nn::Tensor2;
use crate::rng::derived_rng;
use crate::sim::{RewardConfig, RobotSpec, Simulator};

/// Whether the policy sees the damage encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    DamageAware,
    Unaware,
}

impl ObservationMode {
    pub fn policy_obs_dim(self, spec: &RobotSpec) -> usize {
        match self {
            ObservationMode::DamageAware => spec.observation_dim() + 2 * spec.n_legs,
            ObservationMode::Unaware => spec.observation_dim(),
        }
    }

    /// Appends the encoding in damage-aware mode.
    pub fn augment(self, obs: &[f64], encoding: &[f64]) -> Vec<f64> {
        let mut out = obs.to_vec();
        if self == ObservationMode::DamageAware {
            out.extend_from_slice(encoding);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub class_id: usize,
    pub reward: f64,
    /// Sum of forward displacement over the episode.
    pub forward_reward: f64,
    pub steps: usize,
    /// False for an episode cut off by the batch budget.
    pub completed: bool,
}

/// One PPO batch, concatenated over workers in worker order.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub obs: Tensor2,
    pub actions: Tensor2,
    pub log_probs: Vec<f64>,
    pub means: Tensor2,
    pub log_std: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Mean episode reward and forward reward over completed episodes, or
    /// over all episodes when none completed.
    pub fn episode_means(&self) -> (f64, f64) {
        let completed: Vec<&EpisodeSummary> = self.episodes.iter().filter(|e| e.completed).collect();
        let pool: Vec<&EpisodeSummary> =
            if completed.is_empty() { self.episodes.iter().collect() } else { completed };
        if pool.is_empty() {
            return (0.0, 0.0);
        }
        let n = pool.len() as f64;
        (
            pool.iter().map(|e| e.reward).sum::<f64>() / n,
            pool.iter().map(|e| e.forward_reward).sum::<f64>() / n,
        )
    }
}

#[derive(Debug, Clone)]
pub struct RolloutRequest<'a> {
    pub spec: &'a RobotSpec,
    pub reward: RewardConfig,
    pub mix: ClassMix,
    pub mode: ObservationMode,
    pub batch_timesteps: usize,
    /// Independent sampling streams; fixed so results do not depend on
    /// the thread count.
    pub workers: usize,
    pub gae: GaeConfig,
    pub seed: u64,
}

struct Segment {
    obs: Vec<f64>,
    actions: Vec<f64>,
    means: Vec<f64>,
    log_probs: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    dones: Vec<bool>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    episodes: Vec<EpisodeSummary>,
}

fn run_worker(
    policy: &PolicyNet,
    value: &ValueNet,
    req: &RolloutRequest<'_>,
    worker: usize,
    steps: usize,
) -> Result<Segment> {
    let space = DamageSpace::for_limbs(req.spec.n_legs);
    let mut rng = derived_rng(req.seed, worker as u64);
    let mut sims: Vec<Option<Simulator>> = vec![None; space.class_count()];
    let mut seg = Segment {
        obs: Vec::new(),
        actions: Vec::new(),
        means: Vec::new(),
        log_probs: Vec::new(),
        rewards: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps),
        dones: Vec::with_capacity(steps),
        advantages: Vec::new(),
        returns: Vec::new(),
        episodes: Vec::new(),
    };
    let mut bootstrap = 0.0;
    while seg.rewards.len() < steps {
        let class_id = req.mix.sample(&space, &mut rng);
        let env_seed: u64 = rng.random();
        if sims[class_id].is_none() {
            let class = space.class_from_id(class_id)?;
            sims[class_id] = Some(Simulator::new(req.spec, &class, req.reward)?);
        }
        let sim = sims[class_id].as_ref().expect("built above");
        let encoding = space.encode_id(class_id)?.to_features();
        let (mut state, raw) = sim.reset(env_seed);
        let mut obs = req.mode.augment(raw.as_slice(), &encoding);
        let mut summary = EpisodeSummary { class_id, reward: 0.0, forward_reward: 0.0, steps: 0, completed: false };
        loop {
            let mean = policy.mean_action(&obs)?;
            let (action, logp) = policy.sample_around(&mean, &mut rng);
            let v = value.value(&obs)?;
            let (next, raw, info) = sim.step(&state, &action)?;
            seg.obs.extend_from_slice(&obs);
            seg.actions.extend_from_slice(&action);
            seg.means.extend_from_slice(&mean);
            seg.log_probs.push(logp);
            seg.rewards.push(info.reward);
            seg.values.push(v);
            seg.dones.push(next.terminated);
            summary.reward += info.reward;
            summary.forward_reward += info.delta_x;
            summary.steps += 1;
            obs = req.mode.augment(raw.as_slice(), &encoding);
            state = next;
            if state.terminated {
                summary.completed = true;
                break;
            }
            if seg.rewards.len() == steps {
                bootstrap = value.value(&obs)?;
                break;
            }
        }
        seg.episodes.push(summary);
    }
    let (adv, ret) = compute_gae(&seg.rewards, &seg.values, &seg.dones, bootstrap, &req.gae)?;
    seg.advantages = adv;
    seg.returns = ret;
    Ok(seg)
}

/// Collects exactly `batch_timesteps` steps with damage classes drawn from
/// `mix` at every reset, and computes advantages and returns.
pub fn collect_rollouts(policy: &PolicyNet, value: &ValueNet, req: &RolloutRequest<'_>) -> Result<RolloutBatch> {
    let obs_dim = req.mode.policy_obs_dim(req.spec);
    if policy.obs_dim() != obs_dim || value.obs_dim() != obs_dim {
        return Err(config_err(format!(
            "networks expect {} inputs but {:?} observations have {obs_dim}",
            policy.obs_dim(),
            req.mode
        )));
    }
    if policy.act_dim() != req.spec.action_dim() {
        return Err(config_err("policy action dimension does not match robot"));
    }
    if req.workers == 0 || req.batch_timesteps < req.workers {
        return Err(config_err("batch must give every worker at least one step"));
    }
    req.mix.validate(&DamageSpace::for_limbs(req.spec.n_legs))?;
    req.gae.validate()?;
    let base = req.batch_timesteps / req.workers;
    let extra = req.batch_timesteps % req.workers;
    let segments = (0..req.workers)
        .into_par_iter()
        .map(|w| run_worker(policy, value, req, w, base + usize::from(w < extra)))
        .collect::<Result<Vec<_>>>()?;

    let n = req.batch_timesteps;
    let act_dim = policy.act_dim();
    let mut batch = RolloutBatch {
        obs: Tensor2::zeros(0, 0),
        actions: Tensor2::zeros(0, 0),
        log_probs: Vec::with_capacity(n),
        means: Tensor2::zeros(0, 0),
        log_std: policy.log_std.clone(),
        rewards: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        advantages: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
        episodes: Vec::new(),
    };
    let (mut obs, mut actions, mut means) = (Vec::new(), Vec::new(), Vec::new());
    for seg in segments {
        obs.extend(seg.obs);
        actions.extend(seg.actions);
        means.extend(seg.means);
        batch.log_probs.extend(seg.log_probs);
        batch.rewards.extend(seg.rewards);
        batch.values.extend(seg.values);
        batch.dones.extend(seg.dones);
        batch.advantages.extend(seg.advantages);
        batch.returns.extend(seg.returns);
        batch.episodes.extend(seg.episodes);
    }
    batch.obs = Tensor2::from_vec(n, obs_dim, obs)?;
    batch.actions = Tensor2::from_vec(n, act_dim, actions)?;
    batch.means = Tensor2::from_vec(n, act_dim, means)?;
    Ok(batch)
}
