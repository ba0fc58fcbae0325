//! Minimal neural-network substrate: dense and recurrent layers with
//! explicit adjoints, softmax cross-entropy, Adam, gradient checking and a
//! JSON checkpoint format.

mod adam;
mod checkpoint;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod lstm;
mod tensor;

pub use adam::{adam_update, AdamState};
pub use checkpoint::{Checkpoint, LayerRecord, CHECKPOINT_FORMAT_VERSION};
pub use dense::{softmax, softmax_in_place, Activation, DenseCache, DenseGrads, DenseLayer, Mlp, MlpCache};
pub use dropout::{apply_mask, dropout_mask};
pub use gradcheck::finite_diff_check;
pub use loss::softmax_crossentropy;
pub use lstm::{sigmoid, LstmCache, LstmCell, LstmGrads};
pub use tensor::{axpy, dot, Tensor2};

/// Anything exposing its trainable parameters as an ordered list of flat
/// tensors. Gradients and optimizer state use the same ordering.
pub trait Parameterized {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn params_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}
