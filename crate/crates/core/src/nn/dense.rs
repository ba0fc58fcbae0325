use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use super::Parameterized;
use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
    /// Only valid on the final layer of a classifier.
    Softmax,
}

impl Activation {
    fn apply_row(self, row: &mut [f64]) {
        match self {
            Activation::Tanh => row.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Relu => row.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Linear => {}
            Activation::Softmax => softmax_in_place(row),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Fully connected layer `activation(W·x + b)` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Tensor2,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values kept from a batched forward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Tensor2,
    pub pre_activation: Tensor2,
    pub output: Tensor2,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Tensor2,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: Tensor2::zeros(layer.out_size(), layer.in_size()),
            bias: vec![0.0; layer.out_size()],
        }
    }

    pub fn into_vecs(self) -> Vec<Vec<f64>> {
        vec![self.weights.into_vec(), self.bias]
    }
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        in_size: usize,
        out_size: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_size + out_size) as f64).sqrt();
        let data = (0..in_size * out_size)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            weights: Tensor2::from_vec(out_size, in_size, data).expect("shape"),
            bias: vec![0.0; out_size],
            activation,
        }
    }

    pub fn from_parts(weights: Tensor2, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(config_err(format!(
                "bias length {} does not match {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self { weights, bias, activation })
    }

    pub fn in_size(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.infer_batch(&Tensor2::row_vector(input))?.into_vec())
    }

    fn affine(&self, input: &Tensor2) -> Result<Tensor2> {
        if input.cols() != self.in_size() {
            return Err(config_err(format!(
                "dense layer expects {} inputs, got {}",
                self.in_size(),
                input.cols()
            )));
        }
        let mut pre = input.matmul_t(&self.weights);
        for i in 0..pre.rows() {
            for (v, b) in pre.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(pre)
    }

    /// Forward pass without keeping a cache.
    pub fn infer_batch(&self, input: &Tensor2) -> Result<Tensor2> {
        let mut out = self.affine(input)?;
        for i in 0..out.rows() {
            self.activation.apply_row(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn forward_batch(&self, input: &Tensor2) -> Result<(Tensor2, DenseCache)> {
        let pre = self.affine(input)?;
        let mut output = pre.clone();
        for i in 0..output.rows() {
            self.activation.apply_row(output.row_mut(i));
        }
        Ok((output.clone(), DenseCache { input: input.clone(), pre_activation: pre, output }))
    }

    /// Backpropagates `d_output` through the activation and the affine map.
    /// Accumulates parameter gradients into `grads`, returns d(input).
    pub fn backward(&self, cache: &DenseCache, d_output: &Tensor2, grads: &mut DenseGrads) -> Tensor2 {
        let mut dz = d_output.clone();
        for i in 0..dz.rows() {
            let y = cache.output.row(i);
            let z = cache.pre_activation.row(i);
            let row = dz.row_mut(i);
            match self.activation {
                Activation::Tanh => row.iter_mut().zip(y).for_each(|(d, y)| *d *= 1.0 - y * y),
                Activation::Relu => row
                    .iter_mut()
                    .zip(z)
                    .for_each(|(d, z)| if *z <= 0.0 { *d = 0.0 }),
                Activation::Linear => {}
                Activation::Softmax => {
                    let s: f64 = row.iter().zip(y).map(|(d, y)| d * y).sum();
                    row.iter_mut().zip(y).for_each(|(d, y)| *d = y * (*d - s));
                }
            }
        }
        self.backward_from_pre_activation(cache, &dz, grads)
    }

    /// Same as [`DenseLayer::backward`] when the gradient w.r.t. the
    /// pre-activation is already known (softmax + cross-entropy).
    pub fn backward_from_pre_activation(
        &self,
        cache: &DenseCache,
        dz: &Tensor2,
        grads: &mut DenseGrads,
    ) -> Tensor2 {
        dz.t_matmul_acc(&cache.input, &mut grads.weights);
        dz.col_sum_acc(&mut grads.bias);
        dz.matmul(&self.weights)
    }
}

impl Parameterized for DenseLayer {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.weights.data(), &self.bias]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weights.data_mut(), &mut self.bias]
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

pub struct MlpCache {
    pub layers: Vec<DenseCache>,
}

impl Mlp {
    /// `sizes` lists every width from input to output.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::new(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn in_size(&self) -> usize {
        self.layers[0].in_size()
    }

    pub fn out_size(&self) -> usize {
        self.layers.last().expect("non-empty").out_size()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.infer_batch(&Tensor2::row_vector(input))?.into_vec())
    }

    pub fn infer_batch(&self, input: &Tensor2) -> Result<Tensor2> {
        let mut x = self.layers[0].infer_batch(input)?;
        for layer in &self.layers[1..] {
            x = layer.infer_batch(&x)?;
        }
        Ok(x)
    }

    pub fn forward_batch(&self, input: &Tensor2) -> Result<(Tensor2, MlpCache)> {
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = layer.forward_batch(&x)?;
            caches.push(cache);
            x = y;
        }
        Ok((x, MlpCache { layers: caches }))
    }

    pub fn zero_grads(&self) -> Vec<DenseGrads> {
        self.layers.iter().map(DenseGrads::zeros_like).collect()
    }

    pub fn backward(&self, cache: &MlpCache, d_output: &Tensor2, grads: &mut [DenseGrads]) -> Tensor2 {
        let mut d = d_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            d = layer.backward(&cache.layers[i], &d, &mut grads[i]);
        }
        d
    }

    pub fn flatten_grads(grads: Vec<DenseGrads>) -> Vec<Vec<f64>> {
        grads.into_iter().flat_map(DenseGrads::into_vecs).collect()
    }
}

impl Parameterized for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.param_slices_mut()).collect()
    }
}
