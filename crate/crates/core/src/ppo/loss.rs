use serde::{Deserialize, Serialize};

use super::policy::{gaussian_kl, gaussian_log_prob, PolicyNet, ValueNet};
use crate::error::{invalid, Error, Result};
use crate::nn::{Mlp, Tensor2};

/// Samples for one policy update. Old-policy statistics come from the
/// sampling pass.
#[derive(Debug, Clone)]
pub struct PolicyMinibatch {
    pub obs: Tensor2,
    pub actions: Tensor2,
    pub old_log_probs: Vec<f64>,
    pub old_means: Tensor2,
    pub old_log_std: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl PolicyMinibatch {
    /// Builds a minibatch whose old statistics are evaluated under `old`.
    pub fn from_old_policy(old: &PolicyNet, obs: Tensor2, actions: Tensor2, advantages: Vec<f64>) -> Result<Self> {
        let old_means = old.mean_batch(&obs)?;
        let old_log_probs = (0..obs.rows())
            .map(|i| gaussian_log_prob(actions.row(i), old_means.row(i), &old.log_std))
            .collect();
        Ok(Self { obs, actions, old_log_probs, old_means, old_log_std: old.log_std.clone(), advantages })
    }

    pub fn len(&self) -> usize {
        self.obs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.rows() == 0
    }

    fn validate(&self, policy: &PolicyNet) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(invalid("empty minibatch"));
        }
        if self.actions.rows() != n
            || self.old_means.rows() != n
            || self.old_log_probs.len() != n
            || self.advantages.len() != n
        {
            return Err(invalid("minibatch arrays differ in length"));
        }
        if self.actions.cols() != policy.act_dim() || self.old_log_std.len() != policy.act_dim() {
            return Err(invalid("minibatch action width does not match policy"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyLoss {
    pub loss: f64,
    /// Mean clipped surrogate objective (to be maximized).
    pub surrogate: f64,
    pub kl: f64,
    pub clip_fraction: f64,
}

/// `min(r·Â, clip(r, 1−ε, 1+ε)·Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Likelihood ratio of `action` under `policy` versus `old`.
pub fn policy_ratio(policy: &PolicyNet, old: &PolicyNet, obs: &[f64], action: &[f64]) -> Result<f64> {
    Ok((policy.log_prob(obs, action)? - old.log_prob(obs, action)?).exp())
}

fn check_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} = {value}")))
    }
}

/// Clipped surrogate plus β-weighted KL penalty, without gradients.
pub fn ppo_loss(policy: &PolicyNet, batch: &PolicyMinibatch, beta: f64, clip: f64) -> Result<PolicyLoss> {
    batch.validate(policy)?;
    let means = policy.mean_batch(&batch.obs)?;
    loss_terms(policy, batch, &means, beta, clip, None)
}

/// Loss and its gradient w.r.t. the policy parameters, in
/// [`crate::nn::Parameterized`] order.
pub fn ppo_loss_and_grad(
    policy: &PolicyNet,
    batch: &PolicyMinibatch,
    beta: f64,
    clip: f64,
) -> Result<(PolicyLoss, Vec<Vec<f64>>)> {
    batch.validate(policy)?;
    let (means, cache) = policy.mean.forward_batch(&batch.obs)?;
    let mut d_means = Tensor2::zeros(means.rows(), means.cols());
    let mut d_log_std = vec![0.0; policy.act_dim()];
    let loss = loss_terms(policy, batch, &means, beta, clip, Some((&mut d_means, &mut d_log_std)))?;
    let mut grads = policy.mean.zero_grads();
    policy.mean.backward(&cache, &d_means, &mut grads);
    let mut flat = Mlp::flatten_grads(grads);
    flat.push(d_log_std);
    Ok((loss, flat))
}

fn loss_terms(
    policy: &PolicyNet,
    batch: &PolicyMinibatch,
    means: &Tensor2,
    beta: f64,
    clip: f64,
    mut grads: Option<(&mut Tensor2, &mut Vec<f64>)>,
) -> Result<PolicyLoss> {
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let log_std = &policy.log_std;
    let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
    let old_var: Vec<f64> = batch.old_log_std.iter().map(|ls| (2.0 * ls).exp()).collect();
    let (mut surrogate, mut kl, mut clipped) = (0.0, 0.0, 0usize);
    for i in 0..n {
        let mean = means.row(i);
        let action = batch.actions.row(i);
        let old_mean = batch.old_means.row(i);
        let adv = batch.advantages[i];
        let logp = gaussian_log_prob(action, mean, log_std);
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        surrogate += unclipped.min(bounded);
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        kl += gaussian_kl(old_mean, &batch.old_log_std, mean, log_std);

        if let Some((d_means, d_log_std)) = grads.as_mut() {
            // d(−surrogate)/d logp; zero where the clipped branch is active.
            let d_logp = if unclipped <= bounded { -adv * ratio * inv_n } else { 0.0 };
            let row = d_means.row_mut(i);
            for j in 0..row.len() {
                let diff = action[j] - mean[j];
                let shift = mean[j] - old_mean[j];
                row[j] = d_logp * diff * inv_var[j] + beta * inv_n * shift * inv_var[j];
                d_log_std[j] += d_logp * (diff * diff * inv_var[j] - 1.0)
                    + beta * inv_n * (1.0 - (old_var[j] + shift * shift) * inv_var[j]);
            }
        }
    }
    let surrogate = surrogate * inv_n;
    let kl = kl * inv_n;
    let loss = check_finite(-surrogate + beta * kl, "policy loss")?;
    Ok(PolicyLoss { loss, surrogate, kl, clip_fraction: clipped as f64 * inv_n })
}

/// `0.5·mean((V − target)²)`.
pub fn value_loss(value: &ValueNet, obs: &Tensor2, targets: &[f64]) -> Result<f64> {
    let v = value.value_batch(obs)?;
    if v.len() != targets.len() {
        return Err(invalid("value targets differ in length from observations"));
    }
    let n = v.len() as f64;
    check_finite(0.5 * v.iter().zip(targets).map(|(v, t)| (v - t) * (v - t)).sum::<f64>() / n, "value loss")
}

pub fn value_loss_and_grad(value: &ValueNet, obs: &Tensor2, targets: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    if obs.rows() != targets.len() || targets.is_empty() {
        return Err(invalid("value minibatch must be nonempty with one target per observation"));
    }
    let (out, cache) = value.net.forward_batch(obs)?;
    let n = targets.len() as f64;
    let mut loss = 0.0;
    let mut d_out = Tensor2::zeros(out.rows(), 1);
    for (i, t) in targets.iter().enumerate() {
        let err = out.get(i, 0) - t;
        loss += 0.5 * err * err / n;
        d_out.set(i, 0, err / n);
    }
    let loss = check_finite(loss, "value loss")?;
    let mut grads = value.net.zero_grads();
    value.net.backward(&cache, &d_out, &mut grads);
    Ok((loss, Mlp::flatten_grads(grads)))
}

pub const BETA_MIN: f64 = 1e-3;
pub const BETA_MAX: f64 = 1e3;

/// Doubles β when KL overshoots 1.5× target, halves it below target/1.5.
pub fn adapt_kl(beta: f64, observed_kl: f64, target: f64) -> f64 {
    let next = if observed_kl > 1.5 * target {
        beta * 2.0
    } else if observed_kl < target / 1.5 {
        beta / 2.0
    } else {
        beta
    };
    next.clamp(BETA_MIN, BETA_MAX)
}

/// Halves the rate when KL exceeds 2× target, grows it 1.5× below target/2.
pub fn adapt_learning_rate(lr: f64, observed_kl: f64, target: f64, min: f64, max: f64) -> f64 {
    let next = if observed_kl > 2.0 * target {
        lr / 2.0
    } else if observed_kl < target / 2.0 {
        lr * 1.5
    } else {
        lr
    };
    next.clamp(min, max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    }

    #[test]
    fn beta_rule() {
        assert_eq!(adapt_kl(1.0, 0.01, 0.01), 1.0);
        assert_eq!(adapt_kl(1.0, 0.02, 0.01), 2.0);
        assert_eq!(adapt_kl(1.0, 0.0, 0.01), 0.5);
        assert_eq!(adapt_kl(1e3, 1.0, 0.01), 1e3);
        assert_eq!(adapt_kl(1e-3, 0.0, 0.01), 1e-3);
    }

    #[test]
    fn lr_rule() {
        assert_eq!(adapt_learning_rate(3e-4, 0.03, 0.01, 1e-5, 1e-2), 1.5e-4);
        assert_eq!(adapt_learning_rate(3e-4, 0.001, 0.01, 1e-5, 1e-2), 3e-4 * 1.5);
        assert_eq!(adapt_learning_rate(3e-4, 0.01, 0.01, 1e-5, 1e-2), 3e-4);
        assert_eq!(adapt_learning_rate(1e-2, 0.0, 0.01, 1e-5, 1e-2), 1e-2);
    }
}
