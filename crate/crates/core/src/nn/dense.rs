use super::linalg::gemm;
use super::{Initializer, Param, Tensor};
use crate::{Error, Result};

/// Per-row affine map `y = x W + b` over the leading axis of its input.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new(init: &mut Initializer, name: &str, input: usize, output: usize) -> Self {
        Self {
            weight: init.glorot(&format!("{name}.weight"), &[input, output], input, output),
            bias: init.zeros(&format!("{name}.bias"), &[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        if x.row_len() != din {
            return Err(Error::Shape(format!(
                "{}: expected rows of width {din}, got {:?}",
                self.weight.name,
                x.shape()
            )));
        }
        let rows = x.rows();
        let mut y = Vec::with_capacity(rows * dout);
        for _ in 0..rows {
            y.extend_from_slice(self.bias.value.data());
        }
        gemm(rows, din, dout, x.data(), false, self.weight.value.data(), false, 1.0, &mut y);
        Tensor::from_vec(&[rows, dout], y)
    }

    /// Accumulates parameter gradients and returns `dL/dx` shaped like `x`.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        let rows = x.rows();
        if dy.shape() != [rows, dout] {
            return Err(Error::Shape(format!(
                "{}: upstream gradient {:?} does not match [{rows}, {dout}]",
                self.weight.name,
                dy.shape()
            )));
        }
        gemm(din, rows, dout, x.data(), true, dy.data(), false, 1.0, self.weight.grad.data_mut());
        let db = self.bias.grad.data_mut();
        for r in 0..rows {
            for (g, d) in db.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; rows * din];
        gemm(rows, dout, din, dy.data(), false, self.weight.value.data(), true, 0.0, &mut dx);
        Tensor::from_vec(x.shape(), dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Tensor {
    let c = logits.row_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(c.max(1)) {
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
    out
}

/// Row-wise `log_softmax`.
pub fn log_softmax(logits: &Tensor) -> Tensor {
    let c = logits.row_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(c.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

/// Affine output layer followed by softmax; returns `(logits, probabilities)`.
pub fn dense_softmax(layer: &Dense, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let logits = layer.forward(x)?;
    let probs = softmax(&logits);
    Ok((logits, probs))
}
