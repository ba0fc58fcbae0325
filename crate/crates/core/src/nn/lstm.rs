//! Long short-term memory cell.
//!
//! Gate rows are stacked in the order input, forget, candidate, output:
//!
//! ```text
//! z  = W·x + U·h + b
//! i  = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c' = f⊙c + i⊙g
//! h' = o⊙tanh(c')
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use super::Parameterized;
use crate::error::{config_err, invalid, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    /// 4H × input.
    pub w_input: Tensor2,
    /// 4H × H.
    pub w_hidden: Tensor2,
    /// 4H.
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_input: Tensor2,
    pub w_hidden: Tensor2,
    pub bias: Vec<f64>,
}

impl LstmGrads {
    pub fn into_vecs(self) -> Vec<Vec<f64>> {
        vec![self.w_input.into_vec(), self.w_hidden.into_vec(), self.bias]
    }
}

/// Per-step activations of a batched unroll.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Gate activations per step, B × 4H, laid out [i | f | g | o].
    gates: Vec<Tensor2>,
    /// Cell state after each step (index t+1), index 0 is the initial zero state.
    cells: Vec<Tensor2>,
    /// Hidden state before each step.
    hiddens: Vec<Tensor2>,
    inputs: Vec<Tensor2>,
}

impl LstmCell {
    /// Gate weights uniform in ±1/√H, forget-gate bias 1.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (hidden_size as f64).sqrt();
        let mut sample = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-limit..limit)).collect()
        };
        let w_input = Tensor2::from_vec(4 * hidden_size, input_size, sample(4 * hidden_size * input_size))
            .expect("shape");
        let w_hidden = Tensor2::from_vec(4 * hidden_size, hidden_size, sample(4 * hidden_size * hidden_size))
            .expect("shape");
        let mut bias = vec![0.0; 4 * hidden_size];
        bias[hidden_size..2 * hidden_size].iter_mut().for_each(|b| *b = 1.0);
        Self { w_input, w_hidden, bias }
    }

    pub fn input_size(&self) -> usize {
        self.w_input.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn zero_grads(&self) -> LstmGrads {
        LstmGrads {
            w_input: Tensor2::zeros(self.w_input.rows(), self.w_input.cols()),
            w_hidden: Tensor2::zeros(self.w_hidden.rows(), self.w_hidden.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    /// One step of the recurrence for a single sample.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_size() || h.len() != self.hidden_size() || c.len() != self.hidden_size() {
            return Err(config_err("lstm step dimension mismatch"));
        }
        let pre = Tensor2::row_vector(x).matmul_t(&self.w_input);
        let mut cache = None;
        let (h, c) = self.step_batch(
            &pre,
            &Tensor2::row_vector(h),
            &Tensor2::row_vector(c),
            &mut cache,
        );
        Ok((h.into_vec(), c.into_vec()))
    }

    /// Runs the whole sequence from a zero state and returns the final hidden state.
    pub fn forward(&self, sequence: &[Vec<f64>]) -> Result<Vec<f64>> {
        if sequence.is_empty() {
            return Err(invalid("recurrent forward over an empty sequence"));
        }
        let steps = sequence
            .iter()
            .map(|x| {
                if x.len() != self.input_size() {
                    Err(invalid(format!(
                        "sequence element has length {}, cell expects {}",
                        x.len(),
                        self.input_size()
                    )))
                } else {
                    Ok(Tensor2::row_vector(x))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let (h, _) = self.forward_batch(&steps)?;
        Ok(h.into_vec())
    }

    /// Batched unroll over `inputs[t]` (B × input) from a zero state.
    pub fn forward_batch(&self, inputs: &[Tensor2]) -> Result<(Tensor2, LstmCache)> {
        for x in inputs {
            if x.cols() != self.input_size() {
                return Err(config_err("lstm input width mismatch"));
            }
        }
        let pre: Vec<Tensor2> = inputs.iter().map(|x| x.matmul_t(&self.w_input)).collect();
        let (h, mut cache) = self.forward_pre(&pre)?;
        cache.inputs = inputs.to_vec();
        Ok((h, cache))
    }

    /// Unroll where the input contribution `W·x_t` (B × 4H, no bias) is
    /// supplied by the caller.
    pub fn forward_pre(&self, pre_inputs: &[Tensor2]) -> Result<(Tensor2, LstmCache)> {
        let Some(first) = pre_inputs.first() else {
            return Err(invalid("recurrent forward over an empty sequence"));
        };
        let batch = first.rows();
        let hsz = self.hidden_size();
        let mut h = Tensor2::zeros(batch, hsz);
        let mut c = Tensor2::zeros(batch, hsz);
        let mut cache = LstmCache {
            gates: Vec::with_capacity(pre_inputs.len()),
            cells: vec![c.clone()],
            hiddens: Vec::with_capacity(pre_inputs.len()),
            inputs: Vec::new(),
        };
        for pre in pre_inputs {
            if pre.rows() != batch || pre.cols() != 4 * hsz {
                return Err(config_err("lstm pre-activation shape mismatch"));
            }
            cache.hiddens.push(h.clone());
            let mut slot = Some(Tensor2::zeros(0, 0));
            let (nh, nc) = self.step_batch(pre, &h, &c, &mut slot);
            cache.gates.push(slot.expect("gates recorded"));
            cache.cells.push(nc.clone());
            h = nh;
            c = nc;
        }
        Ok((h, cache))
    }

    fn step_batch(
        &self,
        pre: &Tensor2,
        h: &Tensor2,
        c: &Tensor2,
        record: &mut Option<Tensor2>,
    ) -> (Tensor2, Tensor2) {
        let hsz = self.hidden_size();
        let mut z = h.matmul_t(&self.w_hidden);
        let batch = z.rows();
        let mut new_h = Tensor2::zeros(batch, hsz);
        let mut new_c = Tensor2::zeros(batch, hsz);
        for b in 0..batch {
            let zr = z.row_mut(b);
            for ((zv, p), bias) in zr.iter_mut().zip(pre.row(b)).zip(&self.bias) {
                *zv += p + bias;
            }
            for v in &mut zr[0..2 * hsz] {
                *v = sigmoid(*v);
            }
            for v in &mut zr[2 * hsz..3 * hsz] {
                *v = v.tanh();
            }
            for v in &mut zr[3 * hsz..4 * hsz] {
                *v = sigmoid(*v);
            }
            let cprev = c.row(b);
            let zr = z.row(b);
            let crow = new_c.row_mut(b);
            let hrow = new_h.row_mut(b);
            for j in 0..hsz {
                let cj = zr[hsz + j] * cprev[j] + zr[j] * zr[2 * hsz + j];
                crow[j] = cj;
                hrow[j] = zr[3 * hsz + j] * cj.tanh();
            }
        }
        if record.is_some() {
            *record = Some(z);
        }
        (new_h, new_c)
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Accumulates `w_hidden`/`bias` gradients and returns the
    /// gradient w.r.t. each step's pre-activation input `W·x_t`.
    pub fn backward_pre(&self, cache: &LstmCache, d_final: &Tensor2, grads: &mut LstmGrads) -> Vec<Tensor2> {
        let hsz = self.hidden_size();
        let steps = cache.gates.len();
        let batch = d_final.rows();
        let mut dh = d_final.clone();
        let mut dc = Tensor2::zeros(batch, hsz);
        let mut d_pre = vec![Tensor2::zeros(0, 0); steps];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t];
            let c_new = &cache.cells[t + 1];
            let c_old = &cache.cells[t];
            let mut dz = Tensor2::zeros(batch, 4 * hsz);
            for b in 0..batch {
                let g = gates.row(b);
                let cn = c_new.row(b);
                let co = c_old.row(b);
                let dhr = dh.row(b);
                let dzr = dz.row_mut(b);
                let dcr = dc.row_mut(b);
                for j in 0..hsz {
                    let (i, f, cand, o) = (g[j], g[hsz + j], g[2 * hsz + j], g[3 * hsz + j]);
                    let tc = cn[j].tanh();
                    let d_o = dhr[j] * tc;
                    let dct = dcr[j] + dhr[j] * o * (1.0 - tc * tc);
                    dzr[j] = dct * cand * i * (1.0 - i);
                    dzr[hsz + j] = dct * co[j] * f * (1.0 - f);
                    dzr[2 * hsz + j] = dct * i * (1.0 - cand * cand);
                    dzr[3 * hsz + j] = d_o * o * (1.0 - o);
                    dcr[j] = dct * f;
                }
            }
            dz.t_matmul_acc(&cache.hiddens[t], &mut grads.w_hidden);
            dz.col_sum_acc(&mut grads.bias);
            dh = dz.matmul(&self.w_hidden);
            d_pre[t] = dz;
        }
        d_pre
    }

    /// Full backward for [`LstmCell::forward_batch`]; returns d(input) per step.
    pub fn backward(&self, cache: &LstmCache, d_final: &Tensor2, grads: &mut LstmGrads) -> Vec<Tensor2> {
        let d_pre = self.backward_pre(cache, d_final, grads);
        d_pre
            .iter()
            .zip(&cache.inputs)
            .map(|(dz, x)| {
                dz.t_matmul_acc(x, &mut grads.w_input);
                dz.matmul(&self.w_input)
            })
            .collect()
    }
}

impl Parameterized for LstmCell {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.w_input.data(), self.w_hidden.data(), &self.bias]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w_input.data_mut(), self.w_hidden.data_mut(), &mut self.bias]
    }
}
