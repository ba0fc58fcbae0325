use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnosis::{ClassifierTraining, Method};
use crate::error::{config_err, Result};
use crate::ppo::{Curriculum, GaeConfig, PpoConfig};
use crate::sim::{RewardConfig, RobotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotKind {
    Quad,
    Hex,
}

impl RobotKind {
    pub fn spec(self) -> RobotSpec {
        match self {
            RobotKind::Quad => RobotSpec::quadruped(),
            RobotKind::Hex => RobotSpec::hexapod(),
        }
    }
}

impl std::str::FromStr for RobotKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quad" => Ok(RobotKind::Quad),
            "hex" => Ok(RobotKind::Hex),
            other => Err(config_err(format!("unknown robot {other:?}, expected quad or hex"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Healthy-only PPO iterations.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectSettings {
    pub timesteps: usize,
    pub rollouts: usize,
    pub method: Method,
    /// Restrict to these class ids; all classes when absent.
    pub classes: Option<Vec<usize>>,
}

/// Accuracy grid over probe length × rollouts per class × method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub timesteps: Vec<usize>,
    pub rollouts: Vec<usize>,
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Episodes per damage class per policy per seed.
    pub episodes: usize,
    /// Sample actions instead of using the policy mean.
    pub stochastic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploySettings {
    pub episodes: usize,
    /// Episode at which the damage takes effect.
    pub damage_episode: usize,
    pub damage_class: usize,
    pub trigger_fraction: f64,
    /// Episodes averaged before comparing against the threshold.
    pub trigger_window: usize,
    pub baseline_episodes: usize,
    /// Replace the trained classifier by the true damage label.
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub robot: RobotKind,
    pub seeds: Vec<u64>,
    pub spec: RobotSpec,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub gae: GaeConfig,
    pub expert: ExpertConfig,
    /// Shared by the damage-aware and unaware policies.
    pub curriculum: Curriculum,
    pub collect: CollectSettings,
    pub classifier: ClassifierTraining,
    pub grid: GridSettings,
    pub evaluation: EvalSettings,
    pub deploy: DeploySettings,
    /// Not part of the config hash.
    #[serde(default)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Full-length defaults.
    pub fn for_robot(robot: RobotKind) -> Self {
        let spec = robot.spec();
        Self {
            robot,
            seeds: vec![0, 1, 2],
            reward: RewardConfig::for_robot(&spec),
            ppo: PpoConfig::for_robot(&spec),
            gae: GaeConfig::default(),
            expert: ExpertConfig { iterations: 100 },
            curriculum: Curriculum::default(),
            collect: CollectSettings { timesteps: 30, rollouts: 200, method: Method::B, classes: None },
            classifier: ClassifierTraining::default(),
            grid: GridSettings { timesteps: vec![10, 30, 50], rollouts: vec![100, 200], methods: vec![Method::A, Method::B] },
            evaluation: EvalSettings { episodes: 10, stochastic: false },
            deploy: DeploySettings {
                episodes: 100,
                damage_episode: 30,
                damage_class: default_deploy_class(robot),
                trigger_fraction: 0.5,
                trigger_window: 5,
                baseline_episodes: 10,
                oracle: false,
            },
            spec,
            out_dir: PathBuf::from("runs"),
        }
    }

    /// Reduced budget that finishes on a laptop CPU: 200-step episodes,
    /// 4 PPO epochs per batch, a short curriculum and a single-cell grid.
    pub fn desk(robot: RobotKind) -> Self {
        let mut c = Self::for_robot(robot);
        c.spec.max_steps = 200;
        c.ppo.epochs = 4;
        c.expert.iterations = 40;
        c.curriculum = Curriculum::staged([30, 30, 30, 60]);
        c.grid = GridSettings { timesteps: vec![30], rollouts: vec![100], methods: vec![Method::A, Method::B] };
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if (self.spec.n_legs == 6) != (self.robot == RobotKind::Hex) {
            return Err(config_err(format!("robot {:?} does not match a {}-legged spec", self.robot, self.spec.n_legs)));
        }
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        self.ppo.validate()?;
        self.gae.validate()?;
        let space = self.spec.damage_space();
        self.curriculum.validate(&space)?;
        if self.expert.iterations == 0 {
            return Err(config_err("expert needs at least one iteration"));
        }
        if self.collect.timesteps == 0 || self.collect.rollouts < 2 {
            return Err(config_err("collection needs T ≥ 1 and at least 2 rollouts per class"));
        }
        if self.evaluation.episodes == 0 {
            return Err(config_err("evaluation needs at least one episode per class"));
        }
        let d = &self.deploy;
        if d.damage_class >= space.class_count() {
            return Err(config_err(format!("deploy damage class {} outside {} classes", d.damage_class, space.class_count())));
        }
        if d.damage_episode >= d.episodes || d.baseline_episodes == 0 {
            return Err(config_err("deploy damage episode must fall inside the run and baseline needs episodes"));
        }
        if !(d.trigger_fraction > 0.0 && d.trigger_fraction < 1.0) {
            return Err(config_err("trigger fraction must lie in (0, 1)"));
        }
        if d.trigger_window == 0 || d.damage_episode < d.trigger_window {
            return Err(config_err("trigger window must be nonzero and fit before the damage episode"));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON with `out_dir` cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Missing toe on the first leg and jammed last leg. On the quadruped this
/// halves forward reward under every trained seed, so the trigger fires.
fn default_deploy_class(robot: RobotKind) -> usize {
    match robot {
        RobotKind::Quad => 19,
        RobotKind::Hex => 31,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_hash() {
        let c = ExperimentConfig::desk(RobotKind::Quad);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let c = ExperimentConfig::desk(RobotKind::Quad);
        let mut moved = c.clone();
        moved.out_dir = PathBuf::from("/elsewhere");
        assert_eq!(moved.hash(), c.hash());
        let mut other = c.clone();
        other.seeds = vec![7];
        assert_ne!(other.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn defaults_validate() {
        ExperimentConfig::for_robot(RobotKind::Quad).validate().unwrap();
        ExperimentConfig::for_robot(RobotKind::Hex).validate().unwrap();
        ExperimentConfig::desk(RobotKind::Quad).validate().unwrap();
    }

    #[test]
    fn mismatched_robot_rejected() {
        let mut c = ExperimentConfig::for_robot(RobotKind::Quad);
        c.robot = RobotKind::Hex;
        assert!(c.validate().is_err());
    }
}
