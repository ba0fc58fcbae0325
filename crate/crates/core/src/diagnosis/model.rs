//! Sequence classifier: per-timestep linear projection, recurrent cell,
//! a ReLU dense stack with dropout and a softmax head.
//!
//! The projection feeds only the recurrent input weights, so the two are
//! folded into a single `4H × O` map for the forward and backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::collect::DiagnosisSample;
use crate::error::{config_err, invalid, Result};
use crate::nn::{
    apply_mask, dropout_mask, softmax_in_place, Activation, Checkpoint, DenseCache, DenseGrads, DenseLayer,
    LayerRecord, LstmCell, Parameterized, Tensor2,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierShape {
    pub projection: usize,
    pub hidden: usize,
    pub dense: Vec<usize>,
    pub dropout: f64,
}

impl Default for ClassifierShape {
    fn default() -> Self {
        Self { projection: 512, hidden: 32, dense: vec![256, 128, 64], dropout: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    /// Per-sensor divisor applied before the projection.
    pub input_scale: Vec<f64>,
    pub timesteps: usize,
    pub projection: DenseLayer,
    pub lstm: LstmCell,
    pub dense: Vec<DenseLayer>,
    pub output: DenseLayer,
    pub dropout: f64,
}

pub(crate) struct ForwardCache {
    inputs: Vec<Tensor2>,
    lstm: crate::nn::LstmCache,
    dense: Vec<DenseCache>,
    masks: Vec<Tensor2>,
    output: DenseCache,
}

impl ClassifierModel {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        timesteps: usize,
        classes: usize,
        shape: &ClassifierShape,
        rng: &mut R,
    ) -> Self {
        let projection = DenseLayer::new(obs_dim, shape.projection, Activation::Linear, rng);
        let lstm = LstmCell::new(shape.projection, shape.hidden, rng);
        let mut dense = Vec::with_capacity(shape.dense.len());
        let mut width = shape.hidden;
        for &size in &shape.dense {
            dense.push(DenseLayer::new(width, size, Activation::Relu, rng));
            width = size;
        }
        let output = DenseLayer::new(width, classes, Activation::Softmax, rng);
        Self { input_scale: vec![1.0; obs_dim], timesteps, projection, lstm, dense, output, dropout: shape.dropout }
    }

    pub fn obs_dim(&self) -> usize {
        self.projection.in_size()
    }

    pub fn classes(&self) -> usize {
        self.output.out_size()
    }

    /// Sets per-sensor scales to the root mean square over `samples`; zero
    /// stays zero.
    pub fn fit_input_scale(&mut self, samples: &[&DiagnosisSample]) {
        let o = self.obs_dim();
        let mut sum_sq = vec![0.0; o];
        let mut count = 0usize;
        for s in samples {
            for t in 0..s.matrix.rows() {
                for (acc, v) in sum_sq.iter_mut().zip(s.matrix.row(t)) {
                    *acc += v * v;
                }
                count += 1;
            }
        }
        self.input_scale = sum_sq
            .iter()
            .map(|s| {
                let rms = (s / count.max(1) as f64).sqrt();
                if rms > 1e-12 { rms } else { 1.0 }
            })
            .collect();
    }

    fn check_matrix(&self, m: &Tensor2) -> Result<()> {
        if m.rows() != self.timesteps || m.cols() != self.obs_dim() {
            return Err(invalid(format!(
                "probe is {}×{} (steps × sensors), model expects {}×{}",
                m.rows(),
                m.cols(),
                self.timesteps,
                self.obs_dim()
            )));
        }
        Ok(())
    }

    /// Per-step scaled inputs, B × O each.
    pub(crate) fn batch_inputs(&self, matrices: &[&Tensor2]) -> Result<Vec<Tensor2>> {
        for m in matrices {
            self.check_matrix(m)?;
        }
        let o = self.obs_dim();
        Ok((0..self.timesteps)
            .map(|t| {
                let mut x = Tensor2::zeros(matrices.len(), o);
                for (b, m) in matrices.iter().enumerate() {
                    for ((dst, v), s) in x.row_mut(b).iter_mut().zip(m.row(t)).zip(&self.input_scale) {
                        *dst = v / s;
                    }
                }
                x
            })
            .collect())
    }

    /// Projection folded into the recurrent input weights: (W·P, W·p_b).
    fn fused_input(&self) -> (Tensor2, Vec<f64>) {
        let fused = self.lstm.w_input.matmul(&self.projection.weights);
        let offset = Tensor2::row_vector(&self.projection.bias).matmul_t(&self.lstm.w_input).into_vec();
        (fused, offset)
    }

    fn pre_inputs(&self, inputs: &[Tensor2]) -> Vec<Tensor2> {
        let (fused, offset) = self.fused_input();
        inputs
            .iter()
            .map(|x| {
                let mut pre = x.matmul_t(&fused);
                for b in 0..pre.rows() {
                    pre.row_mut(b).iter_mut().zip(&offset).for_each(|(p, c)| *p += c);
                }
                pre
            })
            .collect()
    }

    /// Logits for a batch, dropout off.
    pub(crate) fn logits(&self, inputs: &[Tensor2]) -> Result<Tensor2> {
        let (mut h, _) = self.lstm.forward_pre(&self.pre_inputs(inputs))?;
        for layer in &self.dense {
            h = layer.infer_batch(&h)?;
        }
        let (_, cache) = self.output.forward_batch(&h)?;
        Ok(cache.pre_activation)
    }

    /// Class posteriors for a batch of probes.
    pub fn predict_batch(&self, matrices: &[&Tensor2]) -> Result<Tensor2> {
        let mut p = self.logits(&self.batch_inputs(matrices)?)?;
        for b in 0..p.rows() {
            softmax_in_place(p.row_mut(b));
        }
        Ok(p)
    }

    pub(crate) fn forward_train<R: Rng + ?Sized>(
        &self,
        inputs: Vec<Tensor2>,
        rng: &mut R,
    ) -> Result<(Tensor2, ForwardCache)> {
        let (mut h, lstm_cache) = self.lstm.forward_pre(&self.pre_inputs(&inputs))?;
        let mut dense = Vec::with_capacity(self.dense.len());
        let mut masks = Vec::with_capacity(self.dense.len());
        for layer in &self.dense {
            let (mut y, cache) = layer.forward_batch(&h)?;
            let mask = dropout_mask(y.rows(), y.cols(), self.dropout, rng);
            apply_mask(&mut y, &mask);
            dense.push(cache);
            masks.push(mask);
            h = y;
        }
        let (_, output) = self.output.forward_batch(&h)?;
        let logits = output.pre_activation.clone();
        Ok((logits, ForwardCache { inputs, lstm: lstm_cache, dense, masks, output }))
    }

    pub(crate) fn zero_grads(&self) -> ClassifierGrads {
        ClassifierGrads {
            projection: DenseGrads::zeros_like(&self.projection),
            lstm: self.lstm.zero_grads(),
            dense: self.dense.iter().map(DenseGrads::zeros_like).collect(),
            output: DenseGrads::zeros_like(&self.output),
        }
    }

    /// Backward pass from d(loss)/d(logits).
    pub(crate) fn backward(&self, cache: &ForwardCache, d_logits: &Tensor2, grads: &mut ClassifierGrads) {
        let mut d = self.output.backward_from_pre_activation(&cache.output, d_logits, &mut grads.output);
        for i in (0..self.dense.len()).rev() {
            apply_mask(&mut d, &cache.masks[i]);
            d = self.dense[i].backward(&cache.dense[i], &d, &mut grads.dense[i]);
        }
        let d_pre = self.lstm.backward_pre(&cache.lstm, &d, &mut grads.lstm);
        let o = self.obs_dim();
        let four_h = self.lstm.bias.len();
        let mut d_fused = Tensor2::zeros(four_h, o);
        let mut d_offset = vec![0.0; four_h];
        for (dz, x) in d_pre.iter().zip(&cache.inputs) {
            dz.t_matmul_acc(x, &mut d_fused);
            dz.col_sum_acc(&mut d_offset);
        }
        // fused = W·P, offset = W·p_b.
        let p_t = transpose(&self.projection.weights);
        let dw = d_fused.matmul(&p_t);
        for (g, v) in grads.lstm.w_input.data_mut().iter_mut().zip(dw.data()) {
            *g += v;
        }
        for (r, dc) in d_offset.iter().enumerate() {
            let row = grads.lstm.w_input.row_mut(r);
            for (g, pb) in row.iter_mut().zip(&self.projection.bias) {
                *g += dc * pb;
            }
        }
        let w_t = transpose(&self.lstm.w_input);
        let dp = w_t.matmul(&d_fused);
        for (g, v) in grads.projection.weights.data_mut().iter_mut().zip(dp.data()) {
            *g += v;
        }
        let dpb = Tensor2::row_vector(&d_offset).matmul(&self.lstm.w_input).into_vec();
        for (g, v) in grads.projection.bias.iter_mut().zip(dpb) {
            *g += v;
        }
    }

    pub fn to_checkpoint(&self, tag: &str) -> Checkpoint {
        let mut layers = vec![
            LayerRecord::vector("input_scale", &self.input_scale),
            LayerRecord::dense("projection", &self.projection),
            LayerRecord::lstm("recurrent", &self.lstm),
        ];
        layers.extend(self.dense.iter().enumerate().map(|(i, l)| LayerRecord::dense(format!("dense.{i}"), l)));
        layers.push(LayerRecord::dense("output", &self.output));
        let mut ckpt = Checkpoint::new("damage_classifier", tag, layers);
        ckpt.metadata = serde_json::json!({ "timesteps": self.timesteps, "dropout": self.dropout });
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_model("damage_classifier")?;
        let timesteps = ckpt.metadata["timesteps"]
            .as_u64()
            .ok_or_else(|| config_err("classifier checkpoint lacks timesteps"))? as usize;
        let dropout = ckpt.metadata["dropout"].as_f64().unwrap_or(0.0);
        let dense = ckpt
            .layers
            .iter()
            .filter(|l| l.name.starts_with("dense."))
            .map(LayerRecord::to_dense)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            input_scale: ckpt.layer("input_scale")?.to_vector()?,
            timesteps,
            projection: ckpt.layer("projection")?.to_dense()?,
            lstm: ckpt.layer("recurrent")?.to_lstm()?,
            dense,
            output: ckpt.layer("output")?.to_dense()?,
            dropout,
        })
    }
}

fn transpose(t: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(t.cols(), t.rows());
    for i in 0..t.rows() {
        for (j, v) in t.row(i).iter().enumerate() {
            out.set(j, i, *v);
        }
    }
    out
}

pub(crate) struct ClassifierGrads {
    projection: DenseGrads,
    lstm: crate::nn::LstmGrads,
    dense: Vec<DenseGrads>,
    output: DenseGrads,
}

impl ClassifierGrads {
    /// Flattened in [`Parameterized`] order.
    pub(crate) fn into_vecs(self) -> Vec<Vec<f64>> {
        let mut v = self.projection.into_vecs();
        v.extend(self.lstm.into_vecs());
        for d in self.dense {
            v.extend(d.into_vecs());
        }
        v.extend(self.output.into_vecs());
        v
    }
}

impl Parameterized for ClassifierModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.projection.param_slices();
        v.extend(self.lstm.param_slices());
        for d in &self.dense {
            v.extend(d.param_slices());
        }
        v.extend(self.output.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.projection.param_slices_mut();
        v.extend(self.lstm.param_slices_mut());
        for d in &mut self.dense {
            v.extend(d.param_slices_mut());
        }
        v.extend(self.output.param_slices_mut());
        v
    }
}

/// Most probable class, lowest id on ties.
pub fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Diagnosed class and posterior for one probe (dropout off).
pub fn diagnose(model: &ClassifierModel, probe: &Tensor2) -> Result<(usize, Vec<f64>)> {
    let posterior = model.predict_batch(&[probe])?.into_vec();
    Ok((argmax_lowest(&posterior), posterior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_diff_check, softmax_crossentropy};
    use crate::rng::rng_from_seed;

    fn tiny() -> ClassifierModel {
        let shape = ClassifierShape { projection: 6, hidden: 4, dense: vec![5, 3], dropout: 0.0 };
        let mut rng = rng_from_seed(9);
        let mut m = ClassifierModel::new(3, 4, 3, &shape, &mut rng);
        // Nonzero biases so every gradient path is exercised.
        m.projection.bias.iter_mut().enumerate().for_each(|(i, b)| *b = 0.1 * i as f64 - 0.2);
        m.dense.iter_mut().for_each(|l| l.bias.iter_mut().for_each(|b| *b = 0.05));
        m
    }

    #[test]
    fn posterior_sums_to_one() {
        let m = tiny();
        let probe = Tensor2::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let (_, p) = diagnose(&m, &probe).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let m = tiny();
        assert!(diagnose(&m, &Tensor2::zeros(5, 3)).is_err());
        assert!(diagnose(&m, &Tensor2::zeros(4, 2)).is_err());
    }

    #[test]
    fn ties_break_to_lowest_id() {
        assert_eq!(argmax_lowest(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
    }

    #[test]
    fn fused_gradient_matches_finite_differences() {
        let mut m = tiny();
        let data: Vec<Tensor2> = (0..2)
            .map(|s| Tensor2::from_vec(4, 3, (0..12).map(|i| ((i + 13 * s) as f64 * 0.71).cos()).collect()).unwrap())
            .collect();
        let labels = [2usize, 0];
        let loss_fn = |model: &ClassifierModel| {
            let refs: Vec<&Tensor2> = data.iter().collect();
            let inputs = model.batch_inputs(&refs).unwrap();
            let mut rng = rng_from_seed(0);
            let (logits, cache) = model.forward_train(inputs, &mut rng).unwrap();
            let mut d = Tensor2::zeros(logits.rows(), logits.cols());
            let mut loss = 0.0;
            for (b, &y) in labels.iter().enumerate() {
                let (l, g) = softmax_crossentropy(logits.row(b), y).unwrap();
                loss += l / 2.0;
                d.row_mut(b).iter_mut().zip(g).for_each(|(dst, v)| *dst = v / 2.0);
            }
            let mut grads = model.zero_grads();
            model.backward(&cache, &d, &mut grads);
            (loss, grads.into_vecs())
        };
        let err = finite_diff_check(&mut m, loss_fn, 1e-6).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}
