//! Deployment-time control loop: drive the damage-aware policy with the
//! current diagnosis appended to its observations, watch episode forward
//! reward, and run one diagnosis probe when it collapses.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::damage::{DamageClass, DamageSpace};
use crate::diagnosis::{diagnose, run_probe, ClassifierModel, Method};
use crate::error::{config_err, invalid, Result};
use crate::nn::Tensor2;
use crate::ppo::PolicyNet;
use crate::rng::derive_seed;
use crate::sim::{RewardConfig, RobotSpec, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub reward: f64,
    pub forward_reward: f64,
    pub steps: usize,
}

/// One deterministic (mean-action) episode of `policy` on `sim`, with
/// `encoding` appended to every observation.
pub fn run_policy_episode(policy: &PolicyNet, sim: &Simulator, encoding: &[f64], seed: u64) -> Result<EpisodeOutcome> {
    let (mut state, obs) = sim.reset(seed);
    let mut input = Vec::with_capacity(policy.obs_dim());
    input.extend_from_slice(obs.as_slice());
    input.extend_from_slice(encoding);
    let mut out = EpisodeOutcome { reward: 0.0, forward_reward: 0.0, steps: 0 };
    while !state.terminated {
        let action = policy.mean_action(&input)?;
        let (next, obs, info) = sim.step(&state, &action)?;
        out.reward += info.reward;
        out.forward_reward += info.delta_x;
        out.steps += 1;
        input.clear();
        input.extend_from_slice(obs.as_slice());
        input.extend_from_slice(encoding);
        state = next;
    }
    Ok(out)
}

/// The physical robot. Its damage is set by the scenario and never exposed
/// to the controller.
pub struct LiveRobot {
    sim: Simulator,
    probes: usize,
}

impl LiveRobot {
    pub fn new(spec: &RobotSpec, reward: RewardConfig) -> Result<Self> {
        Ok(Self { sim: Simulator::new(spec, &DamageClass::healthy(), reward)?, probes: 0 })
    }

    /// Damage event.
    pub fn inflict(&mut self, damage: &DamageClass) -> Result<()> {
        let spec = self.sim.spec().clone();
        self.sim = Simulator::new(&spec, damage, *self.sim.reward_config())?;
        Ok(())
    }

    pub fn run_episode(&self, policy: &PolicyNet, encoding: &[f64], seed: u64) -> Result<EpisodeOutcome> {
        run_policy_episode(policy, &self.sim, encoding, seed)
    }

    /// Number of diagnosis probes executed on this robot.
    pub fn probes_executed(&self) -> usize {
        self.probes
    }
}

/// Maps a probe to a class and posterior.
pub trait Diagnoser {
    fn method(&self) -> Method;
    fn timesteps(&self) -> usize;
    /// `episode` identifies when the probe ran; learned diagnosers ignore it.
    fn diagnose(&self, probe: &Tensor2, episode: usize) -> Result<(usize, Vec<f64>)>;
}

pub struct ClassifierDiagnoser {
    pub model: ClassifierModel,
    pub method: Method,
}

impl Diagnoser for ClassifierDiagnoser {
    fn method(&self) -> Method {
        self.method
    }

    fn timesteps(&self) -> usize {
        self.model.timesteps
    }

    fn diagnose(&self, probe: &Tensor2, _episode: usize) -> Result<(usize, Vec<f64>)> {
        diagnose(&self.model, probe)
    }
}

/// Answers with the scenario's true damage; for testing the loop itself.
pub struct OracleDiagnoser {
    pub schedule: Vec<DamageEvent>,
    pub classes: usize,
    pub timesteps: usize,
}

impl Diagnoser for OracleDiagnoser {
    fn method(&self) -> Method {
        Method::B
    }

    fn timesteps(&self) -> usize {
        self.timesteps
    }

    fn diagnose(&self, _probe: &Tensor2, episode: usize) -> Result<(usize, Vec<f64>)> {
        let class = active_damage(&self.schedule, episode);
        let mut posterior = vec![0.0; self.classes];
        posterior[class] = 1.0;
        Ok((class, posterior))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Current diagnosed class.
    pub mu: usize,
    pub healthy_baseline: f64,
    pub trigger_fraction: f64,
    pub last_reward: Option<f64>,
    pub diagnosis_count: usize,
    /// Episodes averaged by the trigger.
    pub window: usize,
    /// Forward rewards since the last trigger, newest last, at most `window`.
    pub recent: Vec<f64>,
    /// A probe is due at the next episode start.
    pub pending: bool,
    /// Cleared after a trigger until the windowed reward recovers above the threshold.
    pub armed: bool,
}

impl AgentState {
    pub fn new(healthy_baseline: f64, trigger_fraction: f64, window: usize) -> Result<Self> {
        if !(trigger_fraction > 0.0 && trigger_fraction < 1.0) {
            return Err(config_err("trigger fraction must lie in (0, 1)"));
        }
        if window == 0 {
            return Err(config_err("trigger window must be at least one episode"));
        }
        Ok(Self {
            mu: 0,
            healthy_baseline,
            trigger_fraction,
            last_reward: None,
            diagnosis_count: 0,
            window,
            recent: Vec::with_capacity(window),
            pending: false,
            armed: true,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.trigger_fraction * self.healthy_baseline
    }

    /// Records an episode's forward reward. Returns whether this episode
    /// fired the trigger: the mean over the last `window` episodes crossed
    /// below the threshold. Firing clears the window, so the diagnosed class
    /// is judged on episodes run under it.
    pub fn observe(&mut self, forward_reward: f64) -> bool {
        self.last_reward = Some(forward_reward);
        if self.recent.len() == self.window {
            self.recent.remove(0);
        }
        self.recent.push(forward_reward);
        if self.recent.len() < self.window {
            return false;
        }
        let mean = self.recent.iter().sum::<f64>() / self.window as f64;
        let below = mean < self.threshold();
        let fired = below && self.armed;
        if fired {
            self.pending = true;
            self.armed = false;
            self.recent.clear();
        } else if !below {
            self.armed = true;
        }
        fired
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisOutcome {
    pub class_id: usize,
    pub posterior_top3: Vec<(usize, f64)>,
    pub truncated: bool,
}

fn top3(posterior: &[f64]) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..posterior.len()).collect();
    idx.sort_by(|&a, &b| posterior[b].total_cmp(&posterior[a]).then(a.cmp(&b)));
    idx.into_iter().take(3).map(|i| (i, posterior[i])).collect()
}

pub struct ProbeSetup<'a> {
    pub spec: &'a RobotSpec,
    pub reward: RewardConfig,
    pub expert: &'a PolicyNet,
}

/// Runs exactly one probe when a diagnosis is pending; otherwise nothing.
pub fn maybe_diagnose(
    agent: &mut AgentState,
    diagnoser: &dyn Diagnoser,
    setup: &ProbeSetup<'_>,
    robot: &mut LiveRobot,
    episode: usize,
    seed: u64,
) -> Result<Option<DiagnosisOutcome>> {
    if !agent.pending {
        return Ok(None);
    }
    let probe = run_probe(
        setup.spec,
        setup.reward,
        &robot.sim,
        setup.expert,
        diagnoser.timesteps(),
        seed,
        diagnoser.method(),
    )?;
    robot.probes += 1;
    let (class_id, posterior) = diagnoser.diagnose(&probe.matrix, episode)?;
    agent.mu = class_id;
    agent.diagnosis_count += 1;
    agent.pending = false;
    Ok(Some(DiagnosisOutcome { class_id, posterior_top3: top3(&posterior), truncated: probe.truncated }))
}

/// Mean forward reward of `policy` on the healthy robot believing it is
/// healthy, over episodes seeded from `seed`.
pub fn calibrate_baseline(
    policy: &PolicyNet,
    spec: &RobotSpec,
    reward: RewardConfig,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Err(invalid("baseline needs at least one episode"));
    }
    let sim = Simulator::new(spec, &DamageClass::healthy(), reward)?;
    let encoding = vec![0.0; 2 * spec.n_legs];
    let mut total = 0.0;
    for e in 0..episodes {
        total += run_policy_episode(policy, &sim, &encoding, derive_seed(seed, e as u64))?.forward_reward;
    }
    Ok(total / episodes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DamageEvent {
    /// Damage takes effect at the start of this episode.
    pub episode: usize,
    pub class_id: usize,
}

/// True damage class in force during `episode`.
pub fn active_damage(schedule: &[DamageEvent], episode: usize) -> usize {
    schedule.iter().filter(|e| e.episode <= episode).max_by_key(|e| e.episode).map_or(0, |e| e.class_id)
}

/// Seed of deployment episode `episode`; the probe uses a separate stream.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, 2 * episode as u64)
}

fn probe_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, 2 * episode as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvent {
    pub episode: usize,
    pub reward: f64,
    pub forward_reward: f64,
    pub triggered: bool,
    pub diagnosed_class: Option<usize>,
    pub posterior_top3: Vec<(usize, f64)>,
    pub truncated_probe: bool,
}

#[derive(Debug, Clone)]
pub struct DeployScenario {
    pub episodes: usize,
    pub schedule: Vec<DamageEvent>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DeployLog {
    pub events: Vec<EpisodeEvent>,
    pub probes: usize,
    pub final_state: AgentState,
}

impl DeployLog {
    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            writeln!(out, "{}", serde_json::to_string(e)?)?;
        }
        Ok(())
    }
}

/// Runs the full loop over a damage schedule.
pub fn run_deployment(
    policy: &PolicyNet,
    diagnoser: &dyn Diagnoser,
    setup: &ProbeSetup<'_>,
    mut agent: AgentState,
    scenario: &DeployScenario,
) -> Result<DeployLog> {
    let space = DamageSpace::for_limbs(setup.spec.n_legs);
    let mut robot = LiveRobot::new(setup.spec, setup.reward)?;
    let mut current = 0;
    let mut events = Vec::with_capacity(scenario.episodes);
    for episode in 0..scenario.episodes {
        let truth = active_damage(&scenario.schedule, episode);
        if truth != current || episode == 0 {
            robot.inflict(&space.class_from_id(truth)?)?;
            current = truth;
        }
        let diagnosis = maybe_diagnose(
            &mut agent,
            diagnoser,
            setup,
            &mut robot,
            episode,
            probe_seed(scenario.seed, episode),
        )?;
        let encoding = space.encode_id(agent.mu)?.to_features();
        let outcome = robot.run_episode(policy, &encoding, episode_seed(scenario.seed, episode))?;
        let triggered = agent.observe(outcome.forward_reward);
        let (diagnosed_class, posterior_top3, truncated_probe) = match diagnosis {
            Some(d) => (Some(d.class_id), d.posterior_top3, d.truncated),
            None => (None, Vec::new(), false),
        };
        events.push(EpisodeEvent {
            episode,
            reward: outcome.reward,
            forward_reward: outcome.forward_reward,
            triggered,
            diagnosed_class,
            posterior_top3,
            truncated_probe,
        });
    }
    Ok(DeployLog { events, probes: robot.probes_executed(), final_state: agent })
}
