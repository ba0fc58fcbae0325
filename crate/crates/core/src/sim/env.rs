use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{apply_damage, Body, RewardConfig, RobotSpec};
use crate::damage::DamageClass;
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

/// A tip counts as touching the ground at or below this height (m).
pub const CONTACT_TOLERANCE: f64 = 1e-6;

/// Reset perturbation of the neutral pose (rad).
const RESET_NOISE: f64 = 0.05;

/// Sink rate of an unsupported body (m/s).
const SINK_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub q: Vec<f64>,
    pub prev_q: Vec<f64>,
    /// Tip x-positions after the last step.
    pub tip_x: Vec<f64>,
    pub height: f64,
    pub prev_height: f64,
    pub velocity: f64,
    pub step_count: usize,
    pub cumulative_x: f64,
    pub terminated: bool,
    /// Physical stance set of the last step.
    pub contacts: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub delta_x: f64,
    pub survival: f64,
    pub contact_count: usize,
    /// Applied slew per unit time, per joint (rad/s).
    pub effort: Vec<f64>,
    /// Commanded joint angles (rad).
    pub targets: Vec<f64>,
    pub reward: f64,
    pub fell: bool,
    pub jumped: bool,
    pub timed_out: bool,
}

/// Dynamics of one robot under one damage configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    spec: RobotSpec,
    body: Body,
    reward: RewardConfig,
}

struct Kinematics {
    tip_x: Vec<f64>,
    extent: Vec<f64>,
}

impl Simulator {
    pub fn new(spec: &RobotSpec, damage: &DamageClass, reward: RewardConfig) -> Result<Self> {
        spec.validate()?;
        let body = apply_damage(spec, damage)?;
        Ok(Self { spec: spec.clone(), body, reward })
    }

    pub fn with_body(spec: &RobotSpec, body: Body, reward: RewardConfig) -> Result<Self> {
        spec.validate()?;
        body.validate(spec)?;
        Ok(Self { spec: spec.clone(), body, reward })
    }

    pub fn spec(&self) -> &RobotSpec {
        &self.spec
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    fn kinematics(&self, q: &[f64]) -> Kinematics {
        let jpl = self.spec.joints_per_leg;
        let mut tip_x = Vec::with_capacity(self.spec.n_legs);
        let mut extent = Vec::with_capacity(self.spec.n_legs);
        for (leg, segments) in self.body.segment_lengths.iter().enumerate() {
            let mut theta = 0.0;
            let (mut x, mut z) = (0.0, 0.0);
            for (i, len) in segments.iter().enumerate() {
                theta += q[leg * jpl + i];
                x += len * theta.sin();
                z += len * theta.cos();
            }
            tip_x.push(x);
            extent.push(z);
        }
        Kinematics { tip_x, extent }
    }

    fn stance(&self, height: f64, extent: &[f64]) -> Vec<bool> {
        extent.iter().map(|e| height - e <= CONTACT_TOLERANCE).collect()
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let dt = self.spec.dt;
        let mut obs = Vec::with_capacity(self.spec.observation_dim());
        obs.extend_from_slice(&state.q);
        obs.extend(state.q.iter().zip(&state.prev_q).map(|(q, p)| (q - p) / dt));
        obs.push(state.height);
        obs.push(state.velocity);
        obs.push((state.height - state.prev_height) / dt);
        obs.extend(
            state
                .contacts
                .iter()
                .zip(&self.body.silenced_contacts)
                .map(|(&c, &silent)| if c && !silent { 1.0 } else { 0.0 }),
        );
        Observation(obs)
    }

    /// Neutral pose perturbed by a seeded uniform offset per joint.
    pub fn reset(&self, seed: u64) -> (EnvState, Observation) {
        let mut rng = rng_from_seed(seed);
        let q: Vec<f64> = self
            .body
            .joint_ranges
            .iter()
            .map(|&r| {
                let offset: f64 = rng.random_range(-RESET_NOISE..=RESET_NOISE);
                offset.clamp(-r, r)
            })
            .collect();
        let kin = self.kinematics(&q);
        let height = self.spec.neutral_height;
        let contacts = self.stance(height, &kin.extent);
        let state = EnvState {
            prev_q: q.clone(),
            q,
            tip_x: kin.tip_x,
            height,
            prev_height: height,
            velocity: 0.0,
            step_count: 0,
            cumulative_x: 0.0,
            terminated: false,
            contacts,
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<(EnvState, Observation, StepInfo)> {
        let spec = &self.spec;
        if action.len() != spec.action_dim() {
            return Err(invalid(format!(
                "action has length {}, robot has {} joints",
                action.len(),
                spec.action_dim()
            )));
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(invalid("action contains NaN"));
        }
        if state.terminated {
            return Err(invalid("step called on a terminated episode"));
        }
        let dt = spec.dt;
        let max_slew = spec.slew_rate * dt;

        let targets: Vec<f64> = action
            .iter()
            .zip(&self.body.joint_ranges)
            .map(|(a, r)| a.clamp(-1.0, 1.0) * r)
            .collect();
        let mut q = state.q.clone();
        let mut effort = Vec::with_capacity(q.len());
        for ((qj, target), range) in q.iter_mut().zip(&targets).zip(&self.body.joint_ranges) {
            let before = *qj;
            *qj = (*qj + (target - *qj).clamp(-max_slew, max_slew)).clamp(-range, *range);
            effort.push((*qj - before) / dt);
        }

        let kin = self.kinematics(&q);
        let contacts = self.stance(state.height, &kin.extent);
        let stance: Vec<usize> = (0..spec.n_legs).filter(|&l| contacts[l]).collect();

        let mut velocity = state.velocity;
        let mut height = state.height;
        if stance.is_empty() {
            velocity *= spec.alpha;
            height -= SINK_RATE * dt;
        } else {
            let n = stance.len() as f64;
            let push = -stance.iter().map(|&l| (kin.tip_x[l] - state.tip_x[l]) / dt).sum::<f64>() / n;
            velocity = spec.alpha * velocity + (1.0 - spec.alpha) * push;
            height = stance.iter().map(|&l| kin.extent[l]).sum::<f64>() / n;
        }
        let delta_x = velocity * dt;
        let step_count = state.step_count + 1;
        let fell = height < spec.fall_fraction * spec.neutral_height;
        let jumped = height > spec.jump_fraction * spec.neutral_height;
        let timed_out = step_count >= spec.max_steps;
        let survival = if fell || jumped { 0.0 } else { self.reward.survival };
        let reward = self.reward.evaluate(delta_x, survival, stance.len(), &effort, &targets);

        let next = EnvState {
            prev_q: state.q.clone(),
            q,
            tip_x: kin.tip_x,
            height,
            prev_height: state.height,
            velocity,
            step_count,
            cumulative_x: state.cumulative_x + delta_x,
            terminated: fell || jumped || timed_out,
            contacts,
        };
        let obs = self.observe(&next);
        let info = StepInfo {
            delta_x,
            survival,
            contact_count: stance.len(),
            effort,
            targets,
            reward,
            fell,
            jumped,
            timed_out,
        };
        Ok((next, obs, info))
    }
}

/// A simulator with its own running state.
#[derive(Debug, Clone)]
pub struct Env {
    sim: Simulator,
    state: EnvState,
}

impl Env {
    pub fn new(sim: Simulator, seed: u64) -> (Self, Observation) {
        let (state, obs) = sim.reset(seed);
        (Self { sim, state }, obs)
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        let (state, obs) = self.sim.reset(seed);
        self.state = state;
        obs
    }

    pub fn step(&mut self, action: &[f64]) -> Result<(Observation, StepInfo)> {
        let (state, obs, info) = self.sim.step(&self.state, action)?;
        self.state = state;
        Ok((obs, info))
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn done(&self) -> bool {
        self.state.terminated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::{Assignment, DamageType};

    fn quad() -> Simulator {
        Simulator::new(&RobotSpec::quadruped(), &DamageClass::healthy(), RewardConfig::quadruped()).unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let sim = quad();
        assert_eq!(sim.reset(17).1, sim.reset(17).1);
        assert_ne!(sim.reset(17).1, sim.reset(18).1);
    }

    #[test]
    fn neutral_pose_contacts_follow_kinematics() {
        let sim = quad();
        let (state, obs) = sim.reset(3);
        // Legs extend ≈1.2 m below a 1.0 m body, so every tip is grounded.
        assert!(state.contacts.iter().all(|&c| c));
        assert_eq!(&obs.0[19..23], &[1.0; 4]);
        assert_eq!(obs.len(), 23);
    }

    #[test]
    fn zero_action_from_rest_rewards_survival_minus_contacts() {
        let sim = quad();
        let mut state = sim.reset(0).0;
        state.q.iter_mut().for_each(|q| *q = 0.0);
        state.prev_q = state.q.clone();
        state.tip_x = vec![0.0; 4];
        let (_, _, info) = sim.step(&state, &[0.0; 8]).unwrap();
        assert!(info.delta_x.abs() < 1e-15);
        assert_eq!(info.contact_count, 4);
        assert_eq!(info.reward, 1.0 - 0.5 * 4.0);
    }

    #[test]
    fn hex_missing_toe_silences_touch_sensor() {
        let spec = RobotSpec::hexapod();
        let class = DamageClass {
            class_id: 2,
            assignments: vec![Assignment { limb: 0, damage: DamageType::MissingToe }],
        };
        let sim = Simulator::new(&spec, &class, RewardConfig::hexapod()).unwrap();
        let (mut state, obs) = sim.reset(5);
        let contact_idx = 2 * spec.joint_count() + 3;
        assert_eq!(obs.0[contact_idx], 0.0);
        for t in 0..200 {
            let action: Vec<f64> = (0..18).map(|j| ((t * 7 + j) as f64 * 0.3).sin()).collect();
            let (next, obs, _) = sim.step(&state, &action).unwrap();
            assert_eq!(obs.0[contact_idx], 0.0);
            if next.terminated {
                break;
            }
            state = next;
        }
    }

    #[test]
    fn rejects_bad_actions() {
        let sim = quad();
        let state = sim.reset(0).0;
        assert!(sim.step(&state, &[0.0; 7]).is_err());
        let mut a = [0.0; 8];
        a[3] = f64::NAN;
        assert!(sim.step(&state, &a).is_err());
    }
}
