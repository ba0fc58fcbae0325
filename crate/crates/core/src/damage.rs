//! Damage-class space: counting, canonical indexing and the partial one-hot
//! encoding appended to observations.
//!
//! Canonical order: id 0 is the healthy robot, then every single damage
//! sorted by `(limb, type)`, then every pair sorted by
//! `(limb_a, limb_b, type_a, type_b)` with `limb_a < limb_b`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of damage types this toolkit models.
pub const DAMAGE_TYPES: usize = 2;

/// Jammed joints are represented by the first joint of the limb.
pub const REPRESENTATIVE_JAM_JOINT: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DamageType {
    /// Type 1: the joint's range collapses to a tiny interval.
    JammedJoint { joint: usize },
    /// Type 2: the terminal limb segment breaks off.
    MissingToe,
}

impl DamageType {
    pub const fn jam() -> Self {
        DamageType::JammedJoint { joint: REPRESENTATIVE_JAM_JOINT }
    }

    /// Zero-based type index (`0` for jams, `1` for missing toes).
    pub fn index(self) -> usize {
        match self {
            DamageType::JammedJoint { .. } => 0,
            DamageType::MissingToe => 1,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Self::jam()),
            1 => Ok(DamageType::MissingToe),
            _ => Err(invalid(format!("unknown damage type index {index}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AssignmentRepr", into = "AssignmentRepr")]
pub struct Assignment {
    pub limb: usize,
    pub damage: DamageType,
}

#[derive(Serialize, Deserialize)]
struct AssignmentRepr {
    limb: usize,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "is_representative_joint")]
    joint: usize,
}

fn is_representative_joint(j: &usize) -> bool {
    *j == REPRESENTATIVE_JAM_JOINT
}

impl From<Assignment> for AssignmentRepr {
    fn from(a: Assignment) -> Self {
        match a.damage {
            DamageType::JammedJoint { joint } => Self { limb: a.limb, kind: "jam".into(), joint },
            DamageType::MissingToe => Self {
                limb: a.limb,
                kind: "missing_toe".into(),
                joint: REPRESENTATIVE_JAM_JOINT,
            },
        }
    }
}

impl TryFrom<AssignmentRepr> for Assignment {
    type Error = String;

    fn try_from(r: AssignmentRepr) -> Result<Self, String> {
        let damage = match r.kind.as_str() {
            "jam" => DamageType::JammedJoint { joint: r.joint },
            "missing_toe" => DamageType::MissingToe,
            other => return Err(format!("unknown damage type {other:?}")),
        };
        Ok(Self { limb: r.limb, damage })
    }
}

/// An enumerated damage configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DamageClass {
    pub class_id: usize,
    pub assignments: Vec<Assignment>,
}

impl DamageClass {
    pub fn healthy() -> Self {
        Self { class_id: 0, assignments: Vec::new() }
    }

    pub fn is_healthy(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn damage_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn damage_on(&self, limb: usize) -> Option<DamageType> {
        self.assignments.iter().find(|a| a.limb == limb).map(|a| a.damage)
    }
}

impl fmt::Display for DamageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignments.is_empty() {
            return write!(f, "#{} healthy", self.class_id);
        }
        write!(f, "#{}", self.class_id)?;
        for a in &self.assignments {
            match a.damage {
                DamageType::JammedJoint { .. } => write!(f, " jam@{}", a.limb)?,
                DamageType::MissingToe => write!(f, " toe@{}", a.limb)?,
            }
        }
        Ok(())
    }
}

/// Length-2n indicator vector; limb `i` owns entries `2i` (type 1) and `2i+1` (type 2).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DamageEncoding(pub Vec<u8>);

impl DamageEncoding {
    pub fn to_features(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of damage classes with at most two damaged limbs:
/// `C(n,0) + C(n,1)·k + C(n,2)·k²`.
pub fn count_classes(limbs: usize, kinds: usize) -> usize {
    let (n, k) = (limbs as u64, kinds as u64);
    (binomial(n, 0) + binomial(n, 1) * k + binomial(n, 2) * k * k) as usize
}

/// The damage space of one morphology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DamageSpace {
    pub limbs: usize,
    pub kinds: usize,
}

impl DamageSpace {
    pub fn new(limbs: usize, kinds: usize) -> Result<Self> {
        if limbs == 0 {
            return Err(invalid("a damage space needs at least one limb"));
        }
        if kinds > DAMAGE_TYPES {
            return Err(invalid(format!("only {DAMAGE_TYPES} damage types are modelled, got {kinds}")));
        }
        Ok(Self { limbs, kinds })
    }

    /// Both damage types over `limbs` limbs.
    pub fn for_limbs(limbs: usize) -> Self {
        Self { limbs, kinds: DAMAGE_TYPES }
    }

    pub fn class_count(&self) -> usize {
        count_classes(self.limbs, self.kinds)
    }

    fn singles(&self) -> usize {
        self.limbs * self.kinds
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        // Pairs with a smaller first limb come first.
        (0..a).map(|i| self.limbs - 1 - i).sum::<usize>() + (b - a - 1)
    }

    pub fn class_from_id(&self, id: usize) -> Result<DamageClass> {
        let total = self.class_count();
        if id >= total {
            return Err(invalid(format!("class id {id} out of range (D = {total})")));
        }
        if id == 0 {
            return Ok(DamageClass::healthy());
        }
        let k = self.kinds;
        let rel = id - 1;
        if rel < self.singles() {
            let assignment = Assignment { limb: rel / k, damage: DamageType::from_index(rel % k)? };
            return Ok(DamageClass { class_id: id, assignments: vec![assignment] });
        }
        let rel = rel - self.singles();
        let (pair, types) = (rel / (k * k), rel % (k * k));
        let mut remaining = pair;
        for a in 0..self.limbs {
            let span = self.limbs - 1 - a;
            if remaining < span {
                let b = a + 1 + remaining;
                return Ok(DamageClass {
                    class_id: id,
                    assignments: vec![
                        Assignment { limb: a, damage: DamageType::from_index(types / k)? },
                        Assignment { limb: b, damage: DamageType::from_index(types % k)? },
                    ],
                });
            }
            remaining -= span;
        }
        unreachable!("class id bounded by class_count")
    }

    /// Canonical id of a set of assignments. Jams on any joint map to the
    /// representative class of their limb.
    pub fn id_from_assignments(&self, assignments: &[Assignment]) -> Result<usize> {
        self.validate_assignments(assignments)?;
        let k = self.kinds;
        let mut sorted = assignments.to_vec();
        sorted.sort_by_key(|a| a.limb);
        match sorted.as_slice() {
            [] => Ok(0),
            [a] => Ok(1 + a.limb * k + a.damage.index()),
            [a, b] => Ok(1
                + self.singles()
                + self.pair_index(a.limb, b.limb) * k * k
                + a.damage.index() * k
                + b.damage.index()),
            _ => unreachable!("validated"),
        }
    }

    pub fn id_from_class(&self, class: &DamageClass) -> Result<usize> {
        self.id_from_assignments(&class.assignments)
    }

    pub fn validate_assignments(&self, assignments: &[Assignment]) -> Result<()> {
        if assignments.len() > 2 {
            return Err(invalid("at most two simultaneous damages are modelled"));
        }
        for (i, a) in assignments.iter().enumerate() {
            if a.limb >= self.limbs {
                return Err(invalid(format!("damage on limb {} but robot has {} limbs", a.limb, self.limbs)));
            }
            if a.damage.index() >= self.kinds {
                return Err(invalid("damage type outside this space"));
            }
            if assignments[..i].iter().any(|b| b.limb == a.limb) {
                return Err(invalid(format!("two damages assigned to limb {}", a.limb)));
            }
        }
        Ok(())
    }

    /// Checks that a class is internally consistent with this space.
    pub fn validate(&self, class: &DamageClass) -> Result<()> {
        let id = self.id_from_class(class)?;
        if id != class.class_id {
            return Err(invalid(format!(
                "class id {} does not match its assignments (canonical id {id})",
                class.class_id
            )));
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<DamageClass> {
        (0..self.class_count())
            .map(|id| self.class_from_id(id).expect("id in range"))
            .collect()
    }

    pub fn encode(&self, class: &DamageClass) -> Result<DamageEncoding> {
        self.validate_assignments(&class.assignments)?;
        let mut bits = vec![0u8; 2 * self.limbs];
        for a in &class.assignments {
            bits[2 * a.limb + a.damage.index()] = 1;
        }
        Ok(DamageEncoding(bits))
    }

    pub fn encode_id(&self, id: usize) -> Result<DamageEncoding> {
        self.encode(&self.class_from_id(id)?)
    }

    pub fn decode(&self, encoding: &DamageEncoding) -> Result<DamageClass> {
        if encoding.len() != 2 * self.limbs {
            return Err(invalid(format!(
                "encoding has length {}, expected {}",
                encoding.len(),
                2 * self.limbs
            )));
        }
        let mut assignments = Vec::new();
        for limb in 0..self.limbs {
            match (encoding.0[2 * limb], encoding.0[2 * limb + 1]) {
                (0, 0) => {}
                (1, 0) => assignments.push(Assignment { limb, damage: DamageType::jam() }),
                (0, 1) => assignments.push(Assignment { limb, damage: DamageType::MissingToe }),
                (1, 1) => return Err(invalid(format!("limb {limb} carries both damage types"))),
                other => return Err(invalid(format!("limb {limb} has non-binary tuple {other:?}"))),
            }
        }
        let class_id = self.id_from_assignments(&assignments)?;
        Ok(DamageClass { class_id, assignments })
    }
}
