use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damage::{DamageClass, DamageSpace};
use crate::error::{config_err, invalid, Result};
use crate::nn::Tensor2;
use crate::ppo::PolicyNet;
use crate::sim::{EnvState, RewardConfig, RobotSpec, Simulator};

/// Classifier input variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Damaged-robot observations.
    A,
    /// Healthy minus damaged observations.
    B,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::A => "A",
            Method::B => "B",
        }
    }

    fn record(self, healthy: &[f64], damaged: &[f64], out: &mut [f64]) {
        match self {
            Method::A => out.copy_from_slice(damaged),
            Method::B => {
                for ((o, h), d) in out.iter_mut().zip(healthy).zip(damaged) {
                    *o = h - d;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionConfig {
    pub n_rollouts: usize,
    pub n_timesteps: usize,
    pub seed_base: u64,
    pub method: Method,
    /// Restricts collection to these class ids; all classes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
}

impl CollectionConfig {
    pub fn validate(&self, space: &DamageSpace) -> Result<()> {
        if self.n_rollouts == 0 || self.n_timesteps == 0 {
            return Err(config_err("n_rollouts and n_timesteps must be at least 1"));
        }
        if let Some(classes) = &self.classes {
            if classes.is_empty() {
                return Err(config_err("class subset is empty"));
            }
            for &c in classes {
                space.class_from_id(c)?;
            }
        }
        Ok(())
    }

    pub fn class_ids(&self, space: &DamageSpace) -> Vec<usize> {
        self.classes.clone().unwrap_or_else(|| (0..space.class_count()).collect())
    }
}

/// One probe: T rows (timesteps) by O columns (sensors).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosisSample {
    pub matrix: Tensor2,
    pub label: usize,
    pub method: Method,
    /// The damaged episode ended early; trailing rows are zero.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub matrix: Tensor2,
    pub truncated: bool,
}

fn check_expert(expert: &PolicyNet, spec: &RobotSpec) -> Result<()> {
    if expert.obs_dim() != spec.observation_dim() || expert.act_dim() != spec.action_dim() {
        return Err(config_err(format!(
            "expert policy is {}→{}, robot needs {}→{}",
            expert.obs_dim(),
            expert.act_dim(),
            spec.observation_dim(),
            spec.action_dim()
        )));
    }
    Ok(())
}

/// Healthy reference trajectory: the T post-step observations, with `None`
/// once the episode has ended.
fn healthy_track(healthy: &Simulator, expert: &PolicyNet, steps: usize, seed: u64) -> Result<Vec<Option<Vec<f64>>>> {
    let (mut state, mut obs) = healthy.reset(seed);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        if state.terminated {
            out.push(None);
            continue;
        }
        let action = expert.mean_action(obs.as_slice())?;
        let (next, next_obs, _) = healthy.step(&state, &action)?;
        out.push(Some(next_obs.0.clone()));
        state = next;
        obs = next_obs;
    }
    Ok(out)
}

/// Steps every damaged simulator in lockstep with one batched expert call
/// per timestep. Row `i` of the result is the probe of `sims[i]`.
fn damaged_probes(
    sims: &[&Simulator],
    expert: &PolicyNet,
    track: &[Option<Vec<f64>>],
    seed: u64,
    method: Method,
) -> Result<Vec<Probe>> {
    let steps = track.len();
    let obs_dim = expert.obs_dim();
    let mut states: Vec<EnvState> = Vec::with_capacity(sims.len());
    let mut obs = Tensor2::zeros(sims.len(), obs_dim);
    for (i, sim) in sims.iter().enumerate() {
        let (s, o) = sim.reset(seed);
        obs.row_mut(i).copy_from_slice(o.as_slice());
        states.push(s);
    }
    let mut probes: Vec<Probe> =
        sims.iter().map(|_| Probe { matrix: Tensor2::zeros(steps, obs_dim), truncated: false }).collect();
    for (t, healthy_obs) in track.iter().enumerate() {
        let actions = expert.mean_batch(&obs)?;
        for (i, sim) in sims.iter().enumerate() {
            if probes[i].truncated {
                continue;
            }
            let Some(h) = healthy_obs else {
                probes[i].truncated = true;
                continue;
            };
            if states[i].terminated {
                probes[i].truncated = true;
                continue;
            }
            let (next, next_obs, _) = sim.step(&states[i], actions.row(i))?;
            method.record(h, next_obs.as_slice(), probes[i].matrix.row_mut(t));
            obs.row_mut(i).copy_from_slice(next_obs.as_slice());
            states[i] = next;
        }
    }
    Ok(probes)
}

/// Paired T-step rollout of the healthy internal model and the live robot
/// from the same seed, both driven by the expert's mean action.
pub fn run_probe(
    spec: &RobotSpec,
    reward: RewardConfig,
    live: &Simulator,
    expert: &PolicyNet,
    timesteps: usize,
    seed: u64,
    method: Method,
) -> Result<Probe> {
    check_expert(expert, spec)?;
    if timesteps == 0 {
        return Err(invalid("probe needs at least one timestep"));
    }
    let healthy = Simulator::new(spec, &DamageClass::healthy(), reward)?;
    let track = healthy_track(&healthy, expert, timesteps, seed)?;
    Ok(damaged_probes(&[live], expert, &track, seed, method)?.remove(0))
}

/// `n_rollouts × classes` samples ordered by (rollout, class); rollout `r`
/// uses seed `seed_base + r` for both robots.
pub fn collect_samples(
    config: &CollectionConfig,
    spec: &RobotSpec,
    reward: RewardConfig,
    expert: &PolicyNet,
) -> Result<Vec<DiagnosisSample>> {
    check_expert(expert, spec)?;
    let space = spec.damage_space();
    config.validate(&space)?;
    let class_ids = config.class_ids(&space);
    let healthy = Simulator::new(spec, &DamageClass::healthy(), reward)?;
    let sims = class_ids
        .iter()
        .map(|&id| Simulator::new(spec, &space.class_from_id(id)?, reward))
        .collect::<Result<Vec<_>>>()?;
    let sim_refs: Vec<&Simulator> = sims.iter().collect();
    let per_rollout = (0..config.n_rollouts)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed_base.wrapping_add(r as u64);
            let track = healthy_track(&healthy, expert, config.n_timesteps, seed)?;
            let probes = damaged_probes(&sim_refs, expert, &track, seed, config.method)?;
            Ok(probes
                .into_iter()
                .zip(&class_ids)
                .map(|(p, &label)| DiagnosisSample {
                    matrix: p.matrix,
                    label,
                    method: config.method,
                    truncated: p.truncated,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_rollout.into_iter().flatten().collect())
}
