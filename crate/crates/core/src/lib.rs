//! Damage-aware locomotion: damage-class enumeration, a kinematic legged
//! simulator, a recurrent damage classifier and damage-conditioned PPO.

pub mod control;
pub mod damage;
pub mod diagnosis;
pub mod error;
pub mod harness;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
