use super::dense::softmax;
use crate::error::{invalid, Result};

/// Cross-entropy of `softmax(logits)` against `label`, with the gradient
/// with respect to the logits.
pub fn softmax_crossentropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        let (loss, _) = softmax_crossentropy(&[0.7; 33], 5).unwrap();
        assert!((loss - 33f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_label_has_near_zero_loss() {
        let mut logits = vec![0.0; 4];
        logits[2] = 800.0;
        let (loss, grad) = softmax_crossentropy(&logits, 2).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn two_class_gradient() {
        let (_, grad) = softmax_crossentropy(&[0.0, 0.0], 0).unwrap();
        assert_eq!(grad, vec![-0.5, 0.5]);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_crossentropy(&[1.0, 2.0], 2),
            Err(crate::Error::InvalidInput(_))
        ));
    }
}
