//! Row-major matrices and the three product kernels the layers need.
//!
//! Every kernel computes each output row from the matching input row alone,
//! with a fixed accumulation order. A sample therefore produces bit-identical
//! results whether it is evaluated alone or inside a minibatch.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(config_err(format!(
                "tensor data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// A single-row matrix.
    pub fn row_vector(data: &[f64]) -> Self {
        Self { rows: 1, cols: data.len(), data: data.to_vec() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(config_err("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · otherᵀ`, shapes (m×k)·(n×k) → m×n.
    pub fn matmul_t(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.cols, "matmul_t inner dimension");
        let mut out = Tensor2::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = out.row_mut(i);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = dot(a, other.row(j));
            }
        }
        out
    }

    /// `self · other`, shapes (m×k)·(k×n) → m×n.
    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Tensor2::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in a.iter().enumerate() {
                if aik != 0.0 {
                    axpy(aik, other.row(k), dst);
                }
            }
        }
        out
    }

    /// `acc += selfᵀ · other`, shapes (m×k)ᵀ·(m×n) → k×n.
    pub fn t_matmul_acc(&self, other: &Tensor2, acc: &mut Tensor2) {
        assert_eq!(self.rows, other.rows, "t_matmul rows");
        assert_eq!(acc.rows, self.cols, "t_matmul acc rows");
        assert_eq!(acc.cols, other.cols, "t_matmul acc cols");
        for i in 0..self.rows {
            let a = self.row(i);
            let b = other.row(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik != 0.0 {
                    axpy(aik, b, acc.row_mut(k));
                }
            }
        }
    }

    /// Column sums accumulated into `acc`.
    pub fn col_sum_acc(&self, acc: &mut [f64]) {
        assert_eq!(acc.len(), self.cols);
        for i in 0..self.rows {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v;
            }
        }
    }
}

/// Dot product with four independent partial sums combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha · x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn transpose(a: &Tensor2) -> Tensor2 {
        let mut t = Tensor2::zeros(a.cols(), a.rows());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                t.set(j, i, a.get(i, j));
            }
        }
        t
    }

    fn sample(rows: usize, cols: usize, offset: f64) -> Tensor2 {
        let data = (0..rows * cols).map(|i| ((i as f64 + offset) * 0.37).sin()).collect();
        Tensor2::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn kernels_agree_with_naive_product() {
        let a = sample(5, 7, 0.0);
        let b = sample(7, 3, 1.0);
        let expect = naive(&a, &b);
        let got = a.matmul(&b);
        let got_t = a.matmul_t(&transpose(&b));
        let mut acc = Tensor2::zeros(7, 3);
        a.t_matmul_acc(&sample(5, 3, 2.0), &mut acc);
        let expect_acc = naive(&transpose(&a), &sample(5, 3, 2.0));
        for (x, y) in got.data().iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in got_t.data().iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in acc.data().iter().zip(expect_acc.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_batch_independent() {
        let a = sample(9, 13, 0.5);
        let w = sample(6, 13, 3.0);
        let full = a.matmul_t(&w);
        for i in 0..a.rows() {
            let single = Tensor2::row_vector(a.row(i)).matmul_t(&w);
            assert_eq!(single.row(0), full.row(i));
        }
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor2::from_vec(2, 2, vec![1.0; 3]).is_err());
    }
}
