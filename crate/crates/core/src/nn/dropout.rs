use rand::Rng;

use super::Tensor2;

/// Inverted-dropout mask: kept units are scaled by `1 / (1 − rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, rate: f64, rng: &mut R) -> Tensor2 {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("shape")
}

pub fn apply_mask(x: &mut Tensor2, mask: &Tensor2) {
    for (v, m) in x.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
}
