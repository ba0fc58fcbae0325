//! Deterministic kinematic legged-locomotion simulator.
//!
//! Each leg is a planar chain whose joint angles are measured cumulatively
//! from the vertical. Joints slew toward their commanded targets at a bounded
//! rate. Legs whose tips reach the ground plane form the stance set; the
//! body is propelled by the backward sweep of stance tips and rests at their
//! mean vertical extent. With no stance legs the body sinks.

mod env;
mod trajectory;

pub use env::{Env, EnvState, Observation, Simulator, StepInfo, CONTACT_TOLERANCE};
pub use trajectory::{TrajectoryRecorder, TrajectoryRow};

use serde::{Deserialize, Serialize};

use crate::damage::{DamageClass, DamageSpace, DamageType};
use crate::error::{invalid, Result};

/// Jammed joints keep ±0.1°.
pub const JAMMED_RANGE_RAD: f64 = 0.1 * std::f64::consts::PI / 180.0;

/// How damage types alter a morphology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageRecipe {
    /// Symmetric range (rad) a jammed joint keeps.
    pub jam_range: f64,
    /// Length (m) the terminal segment shrinks to when the toe is lost.
    pub missing_toe_length: f64,
    /// Whether a lost toe also silences that leg's touch sensor.
    pub silence_touch_sensor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub name: String,
    pub n_legs: usize,
    pub joints_per_leg: usize,
    /// Segment lengths (m) per leg, hip to toe.
    pub segment_lengths: Vec<Vec<f64>>,
    /// Symmetric joint range (rad).
    pub joint_range: f64,
    pub neutral_height: f64,
    /// Maximum joint speed (rad/s).
    pub slew_rate: f64,
    pub dt: f64,
    /// Body-velocity blend factor.
    pub alpha: f64,
    pub fall_fraction: f64,
    pub jump_fraction: f64,
    pub max_steps: usize,
    pub damage: DamageRecipe,
}

impl RobotSpec {
    /// Four legs, two joints each, ±30° joints, 0.8 m lower segment.
    pub fn quadruped() -> Self {
        Self {
            name: "quadruped".into(),
            n_legs: 4,
            joints_per_leg: 2,
            segment_lengths: vec![vec![0.4, 0.8]; 4],
            joint_range: 30f64.to_radians(),
            neutral_height: 1.0,
            slew_rate: 4.0,
            dt: 0.05,
            alpha: 0.8,
            fall_fraction: 0.3,
            jump_fraction: 1.7,
            max_steps: 1000,
            damage: DamageRecipe {
                jam_range: JAMMED_RANGE_RAD,
                missing_toe_length: 0.01,
                silence_touch_sensor: false,
            },
        }
    }

    /// Six legs, three joints each, ±45° joints, 0.2 m neutral height.
    pub fn hexapod() -> Self {
        Self {
            name: "hexapod".into(),
            n_legs: 6,
            joints_per_leg: 3,
            segment_lengths: vec![vec![0.06, 0.06, 0.07]; 6],
            joint_range: 45f64.to_radians(),
            neutral_height: 0.2,
            slew_rate: 4.0,
            dt: 0.05,
            alpha: 0.8,
            fall_fraction: 0.3,
            jump_fraction: 1.7,
            max_steps: 1000,
            damage: DamageRecipe {
                jam_range: JAMMED_RANGE_RAD,
                missing_toe_length: 0.01,
                silence_touch_sensor: true,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_legs == 0 || self.joints_per_leg == 0 {
            return Err(invalid("robot needs legs and joints"));
        }
        if self.segment_lengths.len() != self.n_legs
            || self.segment_lengths.iter().any(|s| s.len() != self.joints_per_leg)
        {
            return Err(invalid("segment count per leg must equal joints per leg"));
        }
        if self.joint_range <= 0.0 {
            return Err(invalid("joint range must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("velocity blend alpha must lie in (0, 1)"));
        }
        if self.dt <= 0.0 || self.slew_rate <= 0.0 || self.max_steps == 0 {
            return Err(invalid("dt, slew rate and max steps must be positive"));
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.n_legs * self.joints_per_leg
    }

    /// Angles, velocities, height, forward and vertical velocity, contacts.
    pub fn observation_dim(&self) -> usize {
        2 * self.joint_count() + 3 + self.n_legs
    }

    pub fn action_dim(&self) -> usize {
        self.joint_count()
    }

    pub fn damage_space(&self) -> DamageSpace {
        DamageSpace::for_limbs(self.n_legs)
    }
}

/// Reward weights: `R = Δx + s − w_c·C − (w_e‖τ‖)² − (w_t‖φ‖)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub contact_weight: f64,
    /// Weight on the actuation-effort proxy τ (zero for the quadruped).
    pub effort_weight: f64,
    /// Weight on the target joint angles φ.
    pub target_weight: f64,
    pub survival: f64,
}

impl RewardConfig {
    pub fn quadruped() -> Self {
        Self { contact_weight: 0.5, effort_weight: 0.0, target_weight: 0.5, survival: 1.0 }
    }

    pub fn hexapod() -> Self {
        Self { contact_weight: 0.03, effort_weight: 0.0005, target_weight: 0.05, survival: 0.1 }
    }

    pub fn for_robot(spec: &RobotSpec) -> Self {
        if spec.n_legs == 6 {
            Self::hexapod()
        } else {
            Self::quadruped()
        }
    }

    pub fn evaluate(&self, delta_x: f64, survival: f64, contacts: usize, effort: &[f64], targets: &[f64]) -> f64 {
        let effort_norm = effort.iter().map(|t| t * t).sum::<f64>().sqrt();
        let target_norm = targets.iter().map(|p| p * p).sum::<f64>().sqrt();
        let effort_term = self.effort_weight * effort_norm;
        let target_term = self.target_weight * target_norm;
        delta_x + survival - self.contact_weight * contacts as f64 - effort_term * effort_term - target_term * target_term
    }
}

/// A morphology after damage: per-joint ranges, per-leg segments and which
/// touch sensors still report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub joint_ranges: Vec<f64>,
    pub segment_lengths: Vec<Vec<f64>>,
    pub silenced_contacts: Vec<bool>,
}

impl Body {
    pub fn healthy(spec: &RobotSpec) -> Self {
        Self {
            joint_ranges: vec![spec.joint_range; spec.joint_count()],
            segment_lengths: spec.segment_lengths.clone(),
            silenced_contacts: vec![false; spec.n_legs],
        }
    }

    /// Every joint jammed.
    pub fn fully_jammed(spec: &RobotSpec) -> Self {
        Self { joint_ranges: vec![spec.damage.jam_range; spec.joint_count()], ..Self::healthy(spec) }
    }

    pub fn validate(&self, spec: &RobotSpec) -> Result<()> {
        if self.joint_ranges.len() != spec.joint_count()
            || self.segment_lengths.len() != spec.n_legs
            || self.segment_lengths.iter().any(|s| s.len() != spec.joints_per_leg)
            || self.silenced_contacts.len() != spec.n_legs
        {
            return Err(invalid("body does not match robot morphology"));
        }
        if self.joint_ranges.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("joint ranges must be positive"));
        }
        Ok(())
    }
}

/// Effective ranges and segment lengths under `damage`.
pub fn apply_damage(spec: &RobotSpec, damage: &DamageClass) -> Result<Body> {
    spec.damage_space().validate_assignments(&damage.assignments)?;
    let mut body = Body::healthy(spec);
    for a in &damage.assignments {
        match a.damage {
            DamageType::JammedJoint { joint } => {
                if joint >= spec.joints_per_leg {
                    return Err(invalid(format!(
                        "jammed joint {joint} but legs have {} joints",
                        spec.joints_per_leg
                    )));
                }
                body.joint_ranges[a.limb * spec.joints_per_leg + joint] = spec.damage.jam_range;
            }
            DamageType::MissingToe => {
                let last = spec.joints_per_leg - 1;
                body.segment_lengths[a.limb][last] = spec.damage.missing_toe_length;
                body.silenced_contacts[a.limb] = spec.damage.silence_touch_sensor;
            }
        }
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::Assignment;

    #[test]
    fn healthy_damage_is_identity() {
        let spec = RobotSpec::quadruped();
        let body = apply_damage(&spec, &DamageClass::healthy()).unwrap();
        assert_eq!(body, Body::healthy(&spec));
    }

    #[test]
    fn quad_missing_toe_shrinks_lower_segment() {
        let spec = RobotSpec::quadruped();
        let class = DamageClass {
            class_id: 4,
            assignments: vec![Assignment { limb: 1, damage: DamageType::MissingToe }],
        };
        let body = apply_damage(&spec, &class).unwrap();
        assert_eq!(body.segment_lengths[1], vec![0.4, 0.01]);
        assert!(!body.silenced_contacts[1]);
    }

    #[test]
    fn hex_jam_range_is_a_tenth_of_a_degree() {
        let spec = RobotSpec::hexapod();
        let class = DamageClass {
            class_id: 5,
            assignments: vec![Assignment { limb: 2, damage: DamageType::JammedJoint { joint: 1 } }],
        };
        let body = apply_damage(&spec, &class).unwrap();
        assert!((body.joint_ranges[7] - 0.001745).abs() < 1e-6);
        assert_eq!(body.joint_ranges[6], spec.joint_range);
    }

    #[test]
    fn observation_dims() {
        assert_eq!(RobotSpec::quadruped().observation_dim(), 23);
        assert_eq!(RobotSpec::hexapod().observation_dim(), 45);
    }

    #[test]
    fn limb_out_of_range_rejected() {
        let spec = RobotSpec::quadruped();
        let class = DamageClass {
            class_id: 0,
            assignments: vec![Assignment { limb: 4, damage: DamageType::MissingToe }],
        };
        assert!(apply_damage(&spec, &class).is_err());
    }
}
