use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Adam optimizer state for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize], learning_rate: f64) -> Self {
        Self {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &[&[f64]], learning_rate: f64) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(&shapes, learning_rate)
    }
}

/// Bias-corrected Adam step applied in place.
pub fn adam_update(params: &mut [&mut [f64]], grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(config_err(format!(
            "adam: {} parameter tensors, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[i].len() {
            return Err(config_err(format!(
                "adam: tensor {i} has {} params, {} grads, {} moments",
                p.len(),
                g.len(),
                state.first_moment[i].len()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_untouched() {
        let mut p = vec![0.25, -1.5, 3.0];
        let before = p.clone();
        let mut state = AdamState::new(&[3], 0.1);
        adam_update(&mut [&mut p[..]], &[vec![0.0; 3]], &mut state).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![1.0];
        let mut state = AdamState::new(&[1], 0.1);
        adam_update(&mut [&mut p[..]], &[vec![1.0]], &mut state).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps).
        assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn symmetric_params_stay_identical() {
        let mut p = vec![0.3, 0.3];
        let mut state = AdamState::new(&[2], 0.01);
        for k in 0..20 {
            let g = (k as f64 * 0.7).sin();
            adam_update(&mut [&mut p[..]], &[vec![g, g]], &mut state).unwrap();
        }
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let mut p = vec![0.0; 2];
        let mut state = AdamState::new(&[2], 0.01);
        let err = adam_update(&mut [&mut p[..]], &[vec![0.0; 3]], &mut state);
        assert!(matches!(err, Err(crate::Error::Config(_))));
    }
}
