use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::damage::DamageSpace;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
    III,
    IV,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::I => "I",
            Stage::II => "II",
            Stage::III => "III",
            Stage::IV => "IV",
        }
    }
}

/// How damage classes are drawn at episode reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassMix {
    /// Group probabilities; classes within a group are equally likely.
    Weighted { healthy: f64, single: f64, multi: f64 },
    /// Every class equally likely.
    Uniform,
}

impl ClassMix {
    pub fn for_stage(stage: Stage) -> Self {
        match stage {
            Stage::I => ClassMix::Weighted { healthy: 1.0, single: 0.0, multi: 0.0 },
            Stage::II => ClassMix::Weighted { healthy: 0.6, single: 0.4, multi: 0.0 },
            Stage::III => ClassMix::Weighted { healthy: 0.4, single: 0.3, multi: 0.3 },
            Stage::IV => ClassMix::Uniform,
        }
    }

    pub fn validate(&self, space: &DamageSpace) -> Result<()> {
        if let ClassMix::Weighted { healthy, single, multi } = *self {
            if [healthy, single, multi].iter().any(|w| !(*w >= 0.0)) {
                return Err(invalid("class mix weights must be non-negative"));
            }
            if ((healthy + single + multi) - 1.0).abs() > 1e-9 {
                return Err(invalid("class mix weights must sum to 1"));
            }
            let (singles, multis) = group_sizes(space);
            if (single > 0.0 && singles == 0) || (multi > 0.0 && multis == 0) {
                return Err(invalid("class mix puts weight on an empty group"));
            }
        }
        Ok(())
    }

    /// Probability of each class id.
    pub fn probabilities(&self, space: &DamageSpace) -> Vec<f64> {
        let d = space.class_count();
        match *self {
            ClassMix::Uniform => vec![1.0 / d as f64; d],
            ClassMix::Weighted { healthy, single, multi } => {
                let (singles, multis) = group_sizes(space);
                (0..d)
                    .map(|id| {
                        if id == 0 {
                            healthy
                        } else if id <= singles {
                            single / singles as f64
                        } else {
                            multi / multis as f64
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: &DamageSpace, rng: &mut R) -> usize {
        let d = space.class_count();
        match *self {
            ClassMix::Uniform => rng.random_range(0..d),
            ClassMix::Weighted { healthy, single, .. } => {
                let (singles, multis) = group_sizes(space);
                let u: f64 = rng.random();
                if u < healthy {
                    0
                } else if u < healthy + single {
                    1 + rng.random_range(0..singles)
                } else {
                    1 + singles + rng.random_range(0..multis)
                }
            }
        }
    }
}

fn group_sizes(space: &DamageSpace) -> (usize, usize) {
    let singles = space.limbs * space.kinds;
    (singles, space.class_count() - 1 - singles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stage: Stage,
    pub mix: ClassMix,
    pub iterations: usize,
}

/// Ordered training stages with per-stage iteration counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub stages: Vec<StagePlan>,
}

impl Curriculum {
    /// Stages I–IV with the given iteration counts.
    pub fn staged(iterations: [usize; 4]) -> Self {
        let stages = [Stage::I, Stage::II, Stage::III, Stage::IV]
            .into_iter()
            .zip(iterations)
            .map(|(stage, iterations)| StagePlan { stage, mix: ClassMix::for_stage(stage), iterations })
            .collect();
        Self { stages }
    }

    pub fn healthy_only(iterations: usize) -> Self {
        Self { stages: vec![StagePlan { stage: Stage::I, mix: ClassMix::for_stage(Stage::I), iterations }] }
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    pub fn validate(&self, space: &DamageSpace) -> Result<()> {
        self.stages.iter().try_for_each(|s| s.mix.validate(space))
    }

    /// Stage plans in iteration order, one per training iteration.
    pub fn schedule(&self) -> impl Iterator<Item = &StagePlan> {
        self.stages.iter().flat_map(|s| std::iter::repeat_n(s, s.iterations))
    }
}

impl Default for Curriculum {
    fn default() -> Self {
        Self::staged([50, 50, 50, 100])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn stage_probabilities_sum_to_one() {
        let space = DamageSpace::for_limbs(4);
        for stage in [Stage::I, Stage::II, Stage::III, Stage::IV] {
            let p = ClassMix::for_stage(stage).probabilities(&space);
            assert_eq!(p.len(), 33);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stage_one_is_always_healthy() {
        let space = DamageSpace::for_limbs(4);
        let mut rng = rng_from_seed(0);
        assert!((0..500).all(|_| ClassMix::for_stage(Stage::I).sample(&space, &mut rng) == 0));
    }

    #[test]
    fn stage_two_never_draws_pairs() {
        let space = DamageSpace::for_limbs(6);
        let mut rng = rng_from_seed(1);
        assert!((0..2000).all(|_| ClassMix::for_stage(Stage::II).sample(&space, &mut rng) <= 12));
    }

    #[test]
    fn schedule_length() {
        let c = Curriculum::default();
        assert_eq!(c.schedule().count(), 250);
        assert_eq!(c.schedule().nth(120).unwrap().stage, Stage::III);
    }

    #[test]
    fn invalid_mix_rejected() {
        let space = DamageSpace::for_limbs(4);
        let bad = ClassMix::Weighted { healthy: 0.5, single: 0.4, multi: 0.0 };
        assert!(bad.validate(&space).is_err());
    }
}
