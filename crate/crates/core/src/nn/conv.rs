//! Width-wise convolutions (`(1, k)` kernels over channel-last rows),
//! `(1, 2)` max pooling, and the causal 1-D convolution used by the TCN.

use super::linalg::gemm_strided;
use super::{Initializer, Param, Tensor};
use crate::{Error, Result};

pub const CONV_KERNEL_WIDTH: usize = 3;
pub const POOL_WIDTH: usize = 2;

/// Valid sliding-window convolution along one row of `width x channels` values.
#[derive(Debug, Clone)]
pub struct RowConv {
    /// `(kernel * in_channels) x out_channels`
    pub weight: Param,
    pub bias: Param,
    kernel: usize,
}

impl RowConv {
    pub fn new(init: &mut Initializer, name: &str, kernel: usize, cin: usize, cout: usize) -> Self {
        Self {
            weight: init.glorot(&format!("{name}.weight"), &[kernel * cin, cout], kernel * cin, cout),
            bias: init.zeros(&format!("{name}.bias"), &[cout]),
            kernel,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[0] / self.kernel
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    /// `row` is `width x cin`; writes `(width - kernel + 1) x cout` into `out`.
    fn forward_row(&self, row: &[f64], out: &mut [f64]) {
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let wout = row.len() / cin + 1 - self.kernel;
        for chunk in out[..wout * cout].chunks_exact_mut(cout) {
            chunk.copy_from_slice(self.bias.value.data());
        }
        gemm_strided(
            wout,
            self.kernel * cin,
            cout,
            row,
            (cin, 1),
            self.weight.value.data(),
            (cout, 1),
            1.0,
            out,
            cout,
        );
    }

    /// Accumulates weight/bias gradients; adds `dL/drow` into `drow`.
    fn backward_row(&mut self, row: &[f64], dout: &[f64], drow: &mut [f64], scratch: &mut Vec<f64>) {
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let k = self.kernel * cin;
        let wout = row.len() / cin + 1 - self.kernel;
        // dW += A^T dY with A the overlapping window matrix
        gemm_strided(
            k,
            wout,
            cout,
            row,
            (1, cin),
            dout,
            (cout, 1),
            1.0,
            self.weight.grad.data_mut(),
            cout,
        );
        let db = self.bias.grad.data_mut();
        for d in dout.chunks_exact(cout) {
            for (g, v) in db.iter_mut().zip(d) {
                *g += v;
            }
        }
        scratch.clear();
        scratch.resize(wout * k, 0.0);
        gemm_strided(
            wout,
            cout,
            k,
            dout,
            (cout, 1),
            self.weight.value.data(),
            (1, cout),
            0.0,
            scratch,
            k,
        );
        for (w, d) in scratch.chunks_exact(k).enumerate() {
            for (a, b) in drow[w * cin..w * cin + k].iter_mut().zip(d) {
                *a += b;
            }
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 2-D convolution with a `(1, 3)` kernel, no padding, ReLU.
///
/// Input `[T, H, W, Cin]`, output `[T, H, W - 2, Cout]`; frames are independent.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub conv: RowConv,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache {
    input: Tensor,
    output: Tensor,
}

impl Conv2d {
    pub fn new(init: &mut Initializer, name: &str, cin: usize, filters: usize) -> Self {
        Self {
            conv: RowConv::new(init, name, CONV_KERNEL_WIDTH, cin, filters),
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [t, h, w, c] if c == self.conv.in_channels() && w >= CONV_KERNEL_WIDTH => {
                Ok(vec![t, h, w + 1 - CONV_KERNEL_WIDTH, self.conv.out_channels()])
            }
            _ => Err(Error::Shape(format!(
                "{}: input {input:?} is not [T, H, W>={CONV_KERNEL_WIDTH}, {}]",
                self.conv.weight.name,
                self.conv.in_channels()
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv2dCache)> {
        let shape = self.output_shape(x.shape())?;
        let (w, cin) = (x.shape()[2], x.shape()[3]);
        let (wout, cout) = (shape[2], shape[3]);
        let rows = shape[0] * shape[1];
        let mut out = vec![0.0; rows * wout * cout];
        for r in 0..rows {
            self.conv.forward_row(
                &x.data()[r * w * cin..(r + 1) * w * cin],
                &mut out[r * wout * cout..(r + 1) * wout * cout],
            );
        }
        out.iter_mut().for_each(|v| *v = v.max(0.0));
        let output = Tensor::from_vec(&shape, out)?;
        Ok((
            output.clone(),
            Conv2dCache {
                input: x.clone(),
                output,
            },
        ))
    }

    pub fn backward(&mut self, cache: &Conv2dCache, dout: &Tensor) -> Result<Tensor> {
        if dout.shape() != cache.output.shape() {
            return Err(Error::Shape(format!(
                "{}: upstream gradient {:?} does not match {:?}",
                self.conv.weight.name,
                dout.shape(),
                cache.output.shape()
            )));
        }
        let (w, cin) = (cache.input.shape()[2], cache.input.shape()[3]);
        let s = cache.output.shape();
        let (rows, wout, cout) = (s[0] * s[1], s[2], s[3]);
        let dpre: Vec<f64> = dout
            .data()
            .iter()
            .zip(cache.output.data())
            .map(|(d, y)| if *y > 0.0 { *d } else { 0.0 })
            .collect();
        let mut dx = vec![0.0; cache.input.len()];
        let mut scratch = Vec::new();
        for r in 0..rows {
            self.conv.backward_row(
                &cache.input.data()[r * w * cin..(r + 1) * w * cin],
                &dpre[r * wout * cout..(r + 1) * wout * cout],
                &mut dx[r * w * cin..(r + 1) * w * cin],
                &mut scratch,
            );
        }
        Tensor::from_vec(cache.input.shape(), dx)
    }
}

/// Non-overlapping `(1, 2)` max pooling; a trailing odd column is dropped.
#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    /// Flat input index chosen for every output element.
    argmax: Vec<usize>,
}

pub fn maxpool2d(x: &Tensor) -> Result<(Tensor, MaxPoolCache)> {
    let [t, h, w, c] = *x.shape() else {
        return Err(Error::Shape(format!("max pool expects [T, H, W, C], got {:?}", x.shape())));
    };
    if w < POOL_WIDTH {
        return Err(Error::Shape(format!("max pool needs width >= {POOL_WIDTH}, got {w}")));
    }
    let wout = w / POOL_WIDTH;
    let mut out = Vec::with_capacity(t * h * wout * c);
    let mut argmax = Vec::with_capacity(out.capacity());
    let d = x.data();
    for r in 0..t * h {
        for j in 0..wout {
            for ch in 0..c {
                let left = (r * w + POOL_WIDTH * j) * c + ch;
                let right = left + c;
                // ties go to the left element
                let pick = if d[right] > d[left] { right } else { left };
                out.push(d[pick]);
                argmax.push(pick);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[t, h, wout, c], out)?,
        MaxPoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2d_backward(cache: &MaxPoolCache, dout: &Tensor) -> Result<Tensor> {
    if dout.len() != cache.argmax.len() {
        return Err(Error::Shape("max pool gradient does not match cached output".into()));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    let g = dx.data_mut();
    for (&i, &d) in cache.argmax.iter().zip(dout.data()) {
        g[i] += d;
    }
    Ok(dx)
}

/// Causal convolution over time: `y_t` only sees `x_{t-k+1..=t}` (zero history).
#[derive(Debug, Clone)]
pub struct CausalConv1d {
    pub conv: RowConv,
}

#[derive(Debug, Clone)]
pub struct CausalConv1dCache {
    padded: Vec<f64>,
    frames: usize,
}

impl CausalConv1d {
    pub fn new(init: &mut Initializer, name: &str, kernel: usize, cin: usize, cout: usize) -> Self {
        Self {
            conv: RowConv::new(init, name, kernel, cin, cout),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, CausalConv1dCache)> {
        let cin = self.conv.in_channels();
        if x.shape().len() != 2 || x.row_len() != cin {
            return Err(Error::Shape(format!(
                "{}: expected [T, {cin}], got {:?}",
                self.conv.weight.name,
                x.shape()
            )));
        }
        let t = x.rows();
        let pad = (self.conv.kernel() - 1) * cin;
        let mut padded = vec![0.0; pad];
        padded.extend_from_slice(x.data());
        let cout = self.conv.out_channels();
        let mut out = vec![0.0; t * cout];
        if t > 0 {
            self.conv.forward_row(&padded, &mut out);
        }
        Ok((Tensor::from_vec(&[t, cout], out)?, CausalConv1dCache { padded, frames: t }))
    }

    pub fn backward(&mut self, cache: &CausalConv1dCache, dout: &Tensor) -> Result<Tensor> {
        let (cin, cout) = (self.conv.in_channels(), self.conv.out_channels());
        if dout.shape() != [cache.frames, cout] {
            return Err(Error::Shape(format!(
                "{}: upstream gradient {:?} does not match [{}, {cout}]",
                self.conv.weight.name,
                dout.shape(),
                cache.frames
            )));
        }
        let mut dpadded = vec![0.0; cache.padded.len()];
        if cache.frames > 0 {
            self.conv.backward_row(&cache.padded, dout.data(), &mut dpadded, &mut Vec::new());
        }
        let pad = (self.conv.kernel() - 1) * cin;
        Tensor::from_vec(&[cache.frames, cin], dpadded.split_off(pad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_frame_shapes() {
        let mut init = Initializer::new(0);
        let conv = Conv2d::new(&mut init, "c", 1, 100);
        assert_eq!(conv.output_shape(&[1, 100, 100, 1]).unwrap(), vec![1, 100, 98, 100]);
        let (pooled, _) = maxpool2d(&Tensor::zeros(&[1, 1, 98, 2])).unwrap();
        assert_eq!(pooled.shape(), &[1, 1, 49, 2]);
        assert!(matches!(conv.output_shape(&[1, 4, 2, 1]), Err(Error::Shape(_))));
    }

    #[test]
    fn ones_filter_sums_three() {
        let mut init = Initializer::new(0);
        let mut conv = Conv2d::new(&mut init, "c", 1, 1);
        conv.conv.weight.value.fill(1.0);
        let x = Tensor::from_vec(&[1, 2, 5, 1], vec![1.0; 10]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 3, 1]);
        assert!(y.data().iter().all(|&v| v == 3.0));

        conv.conv.weight.value.fill(-1.0);
        let (y, _) = conv.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pool_picks_pair_maxima() {
        let x = Tensor::from_vec(&[1, 1, 4, 1], vec![1.0, 5.0, 2.0, 4.0]).unwrap();
        assert_eq!(maxpool2d(&x).unwrap().0.data(), &[5.0, 4.0]);
        let odd = Tensor::from_vec(&[1, 1, 5, 1], vec![7.0; 5]).unwrap();
        assert_eq!(maxpool2d(&odd).unwrap().0.data(), &[7.0, 7.0]);
    }

    #[test]
    fn causal_conv_first_output_sees_only_first_input() {
        let mut init = Initializer::new(3);
        let conv = CausalConv1d::new(&mut init, "t", 3, 1, 1);
        let w = conv.conv.weight.value.data().to_vec();
        let x = Tensor::from_vec(&[3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert!((y.data()[0] - w[2]).abs() < 1e-15);
        assert!((y.data()[1] - (w[1] + 2.0 * w[2])).abs() < 1e-15);
        assert!((y.data()[2] - (w[0] + 2.0 * w[1] + 3.0 * w[2])).abs() < 1e-15);
    }
}
