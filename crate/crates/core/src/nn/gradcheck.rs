use super::Parameterized;
use crate::error::{invalid, Result};

/// Compares analytic gradients against central differences.
///
/// `loss_and_grad` evaluates the model and returns the scalar loss together
/// with gradients laid out like [`Parameterized::param_slices`]. Returns the
/// maximum of `|analytic − numeric| / max(1, |analytic|)` over all parameters.
pub fn finite_diff_check<M, F>(model: &mut M, loss_and_grad: F, epsilon: f64) -> Result<f64>
where
    M: Parameterized,
    F: Fn(&M) -> (f64, Vec<Vec<f64>>),
{
    if !(epsilon > 1e-8 && epsilon < 1e-3) {
        return Err(invalid(format!("finite-difference epsilon {epsilon} outside (1e-8, 1e-3)")));
    }
    let (_, analytic) = loss_and_grad(model);
    let shapes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
    let mut worst = 0.0f64;
    for (t, &len) in shapes.iter().enumerate() {
        for j in 0..len {
            let original = model.param_slices()[t][j];
            model.param_slices_mut()[t][j] = original + epsilon;
            let (plus, _) = loss_and_grad(model);
            model.param_slices_mut()[t][j] = original - epsilon;
            let (minus, _) = loss_and_grad(model);
            model.param_slices_mut()[t][j] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[t][j];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
