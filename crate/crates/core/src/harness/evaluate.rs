use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{run_policy_episode, EpisodeOutcome};
use crate::damage::DamageSpace;
use crate::error::{invalid, Result};
use crate::ppo::{ObservationMode, PolicyNet};
use crate::rng::{derive_seed, derived_rng};
use crate::sim::{RewardConfig, RobotSpec, Simulator};

const STREAM_EVAL: u64 = 0xe7a1;

/// Seed of evaluation episode `e`. Shared by every class and policy so that
/// comparisons are paired.
pub fn eval_episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(seed, STREAM_EVAL), episode as u64)
}

fn sampled_episode(policy: &PolicyNet, sim: &Simulator, encoding: &[f64], seed: u64) -> Result<EpisodeOutcome> {
    let mut rng = derived_rng(seed, 1);
    let (mut state, obs) = sim.reset(seed);
    let mut input = [obs.as_slice(), encoding].concat();
    let mut out = EpisodeOutcome { reward: 0.0, forward_reward: 0.0, steps: 0 };
    while !state.terminated {
        let mean = policy.mean_action(&input)?;
        let (action, _) = policy.sample_around(&mean, &mut rng);
        let (next, obs, info) = sim.step(&state, &action)?;
        out.reward += info.reward;
        out.forward_reward += info.delta_x;
        out.steps += 1;
        input = [obs.as_slice(), encoding].concat();
        state = next;
    }
    Ok(out)
}

/// Mean forward reward per damage class (canonical order) over `episodes`
/// paired episodes. Damage-aware policies receive the true class encoding.
pub fn evaluate_per_class(
    policy: &PolicyNet,
    spec: &RobotSpec,
    reward: RewardConfig,
    mode: ObservationMode,
    episodes: usize,
    seed: u64,
    stochastic: bool,
) -> Result<Vec<f64>> {
    if policy.obs_dim() != mode.policy_obs_dim(spec) {
        return Err(invalid(format!(
            "policy expects {} inputs, {mode:?} evaluation supplies {}",
            policy.obs_dim(),
            mode.policy_obs_dim(spec)
        )));
    }
    if episodes == 0 {
        return Err(invalid("evaluation needs at least one episode"));
    }
    let space = DamageSpace::for_limbs(spec.n_legs);
    (0..space.class_count())
        .into_par_iter()
        .map(|id| {
            let sim = Simulator::new(spec, &space.class_from_id(id)?, reward)?;
            let encoding = match mode {
                ObservationMode::DamageAware => space.encode_id(id)?.to_features(),
                ObservationMode::Unaware => Vec::new(),
            };
            let mut total = 0.0;
            for e in 0..episodes {
                let s = eval_episode_seed(seed, e);
                let outcome = if stochastic {
                    sampled_episode(policy, &sim, &encoding, s)?
                } else {
                    run_policy_episode(policy, &sim, &encoding, s)?
                };
                total += outcome.forward_reward;
            }
            Ok(total / episodes as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class_id: usize,
    pub label: String,
    /// Mean forward reward over seeds and episodes.
    pub dappo: f64,
    pub unaware: f64,
    pub classifier_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub episodes_per_class: usize,
    pub classes: Vec<ClassResult>,
    pub mean_dappo: f64,
    pub mean_unaware: f64,
    /// `(mean_dappo − mean_unaware) / |mean_unaware| × 100`; absent when the
    /// unaware mean is zero.
    pub improvement_pct: Option<f64>,
    /// Fraction of classes where the damage-aware mean is strictly higher.
    pub win_rate: f64,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    /// Confusion matrix summed over seeds, when a classifier was evaluated.
    pub confusion: Option<Vec<Vec<usize>>>,
}

impl EvaluationReport {
    /// `dappo[s][c]` and `unaware[s][c]` are per-seed class means.
    pub fn from_runs(
        space: &DamageSpace,
        config_hash: &str,
        seeds: &[u64],
        episodes_per_class: usize,
        dappo: &[Vec<f64>],
        unaware: &[Vec<f64>],
        confusion: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let d = space.class_count();
        if dappo.len() != seeds.len() || unaware.len() != seeds.len() {
            return Err(invalid("one result row per seed is required for both policies"));
        }
        if dappo.iter().chain(unaware).any(|r| r.len() != d) {
            return Err(invalid(format!("every run must cover all {d} classes")));
        }
        let mean_over = |runs: &[Vec<f64>], c: usize| runs.iter().map(|r| r[c]).sum::<f64>() / runs.len() as f64;
        let accuracy = confusion.as_ref().map(|m| {
            m.iter()
                .enumerate()
                .map(|(i, row)| {
                    let n: usize = row.iter().sum();
                    if n == 0 {
                        0.0
                    } else {
                        row[i] as f64 / n as f64
                    }
                })
                .collect::<Vec<_>>()
        });
        let mut classes = Vec::with_capacity(d);
        for c in 0..d {
            classes.push(ClassResult {
                class_id: c,
                label: space.class_from_id(c)?.to_string(),
                dappo: mean_over(dappo, c),
                unaware: mean_over(unaware, c),
                classifier_accuracy: accuracy.as_ref().and_then(|a| a.get(c).copied()),
            });
        }
        let mean_dappo = classes.iter().map(|c| c.dappo).sum::<f64>() / d as f64;
        let mean_unaware = classes.iter().map(|c| c.unaware).sum::<f64>() / d as f64;
        let wins = classes.iter().filter(|c| c.dappo > c.unaware).count();
        let ties = classes.iter().filter(|c| c.dappo == c.unaware).count();
        Ok(Self {
            config_hash: config_hash.to_string(),
            seeds: seeds.to_vec(),
            episodes_per_class,
            mean_dappo,
            mean_unaware,
            improvement_pct: (mean_unaware != 0.0).then(|| (mean_dappo - mean_unaware) / mean_unaware.abs() * 100.0),
            win_rate: wins as f64 / d as f64,
            wins,
            ties,
            losses: d - wins - ties,
            classes,
            confusion,
        })
    }

    pub const CSV_HEADER: &'static str = "class_id,label,dappo_forward_reward,unaware_forward_reward,classifier_accuracy";

    pub fn csv_rows(&self) -> Vec<String> {
        self.classes
            .iter()
            .map(|c| {
                let acc = c.classifier_accuracy.map(|a| a.to_string()).unwrap_or_default();
                format!("{},{},{},{},{acc}", c.class_id, c.label.replace(',', ";"), c.dappo, c.unaware)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn identical_runs_give_zero_improvement_and_all_ties() {
        let space = DamageSpace::for_limbs(4);
        let run: Vec<f64> = (0..33).map(|c| c as f64 - 5.0).collect();
        let r = EvaluationReport::from_runs(&space, "h", &[0], 10, std::slice::from_ref(&run), std::slice::from_ref(&run), None).unwrap();
        assert_eq!(r.improvement_pct, Some(0.0));
        assert_eq!((r.wins, r.ties, r.losses), (0, 33, 0));
        assert_eq!(r.win_rate, 0.0);
        assert_eq!(r.classes.len(), 33);
    }

    #[test]
    fn improvement_uses_absolute_denominator() {
        let space = DamageSpace::for_limbs(4);
        let d = vec![vec![1.0; 33]];
        let u = vec![vec![-2.0; 33]];
        let r = EvaluationReport::from_runs(&space, "h", &[0], 1, &d, &u, None).unwrap();
        assert_eq!(r.improvement_pct, Some(150.0));
        assert_eq!(r.wins, 33);
    }

    #[test]
    fn incomplete_coverage_rejected() {
        let space = DamageSpace::for_limbs(4);
        let short = vec![vec![0.0; 32]];
        assert!(EvaluationReport::from_runs(&space, "h", &[0], 1, &short, &short, None).is_err());
    }

    #[test]
    fn per_class_evaluation_covers_every_class() {
        let mut spec = RobotSpec::quadruped();
        spec.max_steps = 5;
        let reward = RewardConfig::for_robot(&spec);
        let mut rng = rng_from_seed(3);
        let mode = ObservationMode::DamageAware;
        let policy = PolicyNet::new(mode.policy_obs_dim(&spec), spec.action_dim(), &[8], &mut rng);
        let a = evaluate_per_class(&policy, &spec, reward, mode, 2, 1, false).unwrap();
        let b = evaluate_per_class(&policy, &spec, reward, mode, 2, 1, false).unwrap();
        assert_eq!(a.len(), 33);
        assert_eq!(a, b);
        let s = evaluate_per_class(&policy, &spec, reward, mode, 2, 1, true).unwrap();
        assert_ne!(a, s);
        assert!(evaluate_per_class(&policy, &spec, reward, ObservationMode::Unaware, 2, 1, false).is_err());
    }
}
