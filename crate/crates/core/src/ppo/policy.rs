use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::nn::{Activation, Checkpoint, LayerRecord, Mlp, Parameterized, Tensor2};

pub const LOG_STD_INIT: f64 = -0.5;
pub const LOG_STD_MIN: f64 = -3.0;
pub const LOG_STD_MAX: f64 = 1.0;
pub const DEFAULT_HIDDEN: [usize; 3] = [100, 200, 100];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((a, m), ls) in action.iter().zip(mean).zip(log_std) {
        let z = (a - m) * (-ls).exp();
        total += -0.5 * z * z - ls - 0.5 * LN_2PI;
    }
    total
}

/// Closed-form KL(old ‖ new) between diagonal Gaussians.
pub fn gaussian_kl(old_mean: &[f64], old_log_std: &[f64], new_mean: &[f64], new_log_std: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..old_mean.len() {
        let var_ratio = (2.0 * (old_log_std[j] - new_log_std[j])).exp();
        let diff = (old_mean[j] - new_mean[j]) * (-new_log_std[j]).exp();
        total += new_log_std[j] - old_log_std[j] + 0.5 * (var_ratio + diff * diff) - 0.5;
    }
    total
}

/// Gaussian policy with a tanh-squashed mean and a state-independent
/// log standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub mean: Mlp,
    pub log_std: Vec<f64>,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        Self {
            mean: Mlp::new(&sizes, Activation::Tanh, Activation::Tanh, rng),
            log_std: vec![LOG_STD_INIT; act_dim],
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.mean.in_size()
    }

    pub fn act_dim(&self) -> usize {
        self.mean.out_size()
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_obs(obs.len())?;
        self.mean.forward(obs)
    }

    pub fn mean_batch(&self, obs: &Tensor2) -> Result<Tensor2> {
        self.check_obs(obs.cols())?;
        self.mean.infer_batch(obs)
    }

    fn check_obs(&self, len: usize) -> Result<()> {
        if len != self.obs_dim() {
            return Err(config_err(format!(
                "policy expects observations of length {}, got {len}",
                self.obs_dim()
            )));
        }
        Ok(())
    }

    /// Samples an action given the mean; returns it with its log-probability.
    pub fn sample_around<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let eps: f64 = rng.sample(StandardNormal);
                m + ls.exp() * eps
            })
            .collect();
        let logp = gaussian_log_prob(&action, mean, &self.log_std);
        (action, logp)
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mean = self.mean_action(obs)?;
        Ok(gaussian_log_prob(action, &mean, &self.log_std))
    }

    pub fn clamp_log_std(&mut self) {
        for ls in &mut self.log_std {
            *ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn to_checkpoint(&self, tag: &str) -> Checkpoint {
        let mut layers: Vec<LayerRecord> = self
            .mean
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| LayerRecord::dense(format!("mean.{i}"), l))
            .collect();
        layers.push(LayerRecord::vector("log_std", &self.log_std));
        Checkpoint::new("gaussian_policy", tag, layers)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_model("gaussian_policy")?;
        let layers = ckpt
            .layers
            .iter()
            .filter(|l| l.name.starts_with("mean."))
            .map(LayerRecord::to_dense)
            .collect::<Result<Vec<_>>>()?;
        if layers.is_empty() {
            return Err(config_err("policy checkpoint has no layers"));
        }
        let log_std = ckpt.layer("log_std")?.to_vector()?;
        let policy = Self { mean: Mlp { layers }, log_std };
        if policy.log_std.len() != policy.act_dim() {
            return Err(config_err("log_std length does not match action dimension"));
        }
        Ok(policy)
    }
}

impl Parameterized for PolicyNet {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.mean.param_slices();
        v.push(&self.log_std);
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.mean.param_slices_mut();
        v.push(&mut self.log_std);
        v
    }
}

/// State-value network with a linear scalar head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub net: Mlp,
}

impl ValueNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self { net: Mlp::new(&sizes, Activation::Tanh, Activation::Linear, rng) }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.in_size()
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.forward(obs)?[0])
    }

    pub fn value_batch(&self, obs: &Tensor2) -> Result<Vec<f64>> {
        Ok(self.net.infer_batch(obs)?.into_vec())
    }

    pub fn to_checkpoint(&self, tag: &str) -> Checkpoint {
        let layers = self
            .net
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| LayerRecord::dense(format!("value.{i}"), l))
            .collect();
        Checkpoint::new("value_function", tag, layers)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_model("value_function")?;
        let layers = ckpt.layers.iter().map(LayerRecord::to_dense).collect::<Result<Vec<_>>>()?;
        if layers.is_empty() {
            return Err(config_err("value checkpoint has no layers"));
        }
        Ok(Self { net: Mlp { layers } })
    }
}

impl Parameterized for ValueNet {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.net.param_slices()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.param_slices_mut()
    }
}
