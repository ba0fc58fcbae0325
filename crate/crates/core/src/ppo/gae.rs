use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaeConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self { gamma: 0.995, lambda: 0.98 }
    }
}

impl GaeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0 && self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid("gamma and lambda must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Generalized advantage estimation over one contiguous segment.
///
/// `values[t]` is V(s_t); `bootstrap` is V of the state after the last step
/// and is ignored when that step is terminal. Returns (advantages, returns).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    config: &GaeConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(invalid(format!(
            "gae inputs differ in length: rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + config.gamma * next_value * live - values[t];
        next_adv = delta + config.gamma * config.lambda * live * next_adv;
        advantages[t] = next_adv;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// Rescales to zero mean and unit standard deviation. Leaves constant or
/// single-element input centred only.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    adv.iter_mut().for_each(|a| *a -= mean);
    let var = adv.iter().map(|a| a * a).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 {
        adv.iter_mut().for_each(|a| *a /= std);
    }
}
