//! Gated recurrent unit with backpropagation through time.
//!
//! Gate blocks are laid out `[update | reset | candidate]` along the last
//! axis of every parameter:
//!
//! ```text
//! z  = sigmoid(x Wz + h Uz + bz)
//! r  = sigmoid(x Wr + h Ur + br)
//! hc = tanh(x Wh + (r * h) Uh + bh)
//! h' = (1 - z) * h + z * hc
//! ```

use super::linalg::gemm;
use super::{Initializer, Param, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Gru {
    /// `input x 3H`
    pub w: Param,
    /// `H x 3H`
    pub u: Param,
    /// `3H`
    pub b: Param,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Tensor,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    hc: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Gru {
    pub fn new(init: &mut Initializer, name: &str, input: usize, hidden: usize) -> Self {
        Self {
            w: init.glorot(&format!("{name}.w"), &[input, 3 * hidden], input, 3 * hidden),
            u: init.glorot(&format!("{name}.u"), &[hidden, 3 * hidden], hidden, 3 * hidden),
            b: init.zeros(&format!("{name}.b"), &[3 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.value.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.shape()[0]
    }

    /// Full hidden sequence `T x H` starting from `h0` (zeros when `None`).
    pub fn forward(&self, x: &Tensor, h0: Option<&[f64]>) -> Result<(Tensor, GruCache)> {
        let (din, h) = (self.input_dim(), self.hidden());
        if x.shape().len() != 2 || x.row_len() != din {
            return Err(Error::Shape(format!(
                "{}: expected input [T, {din}], got {:?}",
                self.w.name,
                x.shape()
            )));
        }
        if let Some(h0) = h0 {
            if h0.len() != h {
                return Err(Error::Shape(format!("initial state has {} values, expected {h}", h0.len())));
            }
        }
        let t_len = x.rows();
        let g = 3 * h;

        // input projections for every step at once
        let mut xw = Vec::with_capacity(t_len * g);
        for _ in 0..t_len {
            xw.extend_from_slice(self.b.value.data());
        }
        gemm(t_len, din, g, x.data(), false, self.w.value.data(), false, 1.0, &mut xw);

        let u = self.u.value.data();
        let mut out = vec![0.0; t_len * h];
        let mut h_prev = vec![0.0; t_len * h];
        let mut zs = vec![0.0; t_len * h];
        let mut rs = vec![0.0; t_len * h];
        let mut hcs = vec![0.0; t_len * h];
        let mut state = h0.map_or_else(|| vec![0.0; h], <[f64]>::to_vec);
        let mut rec = vec![0.0; g];
        let mut rh = vec![0.0; h];

        for t in 0..t_len {
            h_prev[t * h..(t + 1) * h].copy_from_slice(&state);
            let a = &xw[t * g..(t + 1) * g];

            // h U for the update/reset blocks
            rec[..2 * h].iter_mut().for_each(|v| *v = 0.0);
            for (i, &hi) in state.iter().enumerate() {
                if hi != 0.0 {
                    let urow = &u[i * g..i * g + 2 * h];
                    for (acc, w) in rec[..2 * h].iter_mut().zip(urow) {
                        *acc += hi * w;
                    }
                }
            }
            for j in 0..h {
                zs[t * h + j] = sigmoid(a[j] + rec[j]);
                rs[t * h + j] = sigmoid(a[h + j] + rec[h + j]);
                rh[j] = rs[t * h + j] * state[j];
            }
            rec[2 * h..].iter_mut().for_each(|v| *v = 0.0);
            for (i, &v) in rh.iter().enumerate() {
                if v != 0.0 {
                    let urow = &u[i * g + 2 * h..(i + 1) * g];
                    for (acc, w) in rec[2 * h..].iter_mut().zip(urow) {
                        *acc += v * w;
                    }
                }
            }
            for j in 0..h {
                let hc = (a[2 * h + j] + rec[2 * h + j]).tanh();
                hcs[t * h + j] = hc;
                let z = zs[t * h + j];
                state[j] = (1.0 - z) * state[j] + z * hc;
            }
            out[t * h..(t + 1) * h].copy_from_slice(&state);
        }

        let cache = GruCache {
            x: x.clone(),
            h_prev,
            z: zs,
            r: rs,
            hc: hcs,
        };
        Ok((Tensor::from_vec(&[t_len, h], out)?, cache))
    }

    /// BPTT; accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, cache: &GruCache, dout: &Tensor) -> Result<Tensor> {
        let (din, h) = (self.input_dim(), self.hidden());
        let g = 3 * h;
        let t_len = cache.x.rows();
        if dout.shape() != [t_len, h] {
            return Err(Error::Shape(format!(
                "{}: upstream gradient {:?} does not match [{t_len}, {h}]",
                self.w.name,
                dout.shape()
            )));
        }
        let u = self.u.value.data();
        let mut dgates = vec![0.0; t_len * g];
        let mut dh_next = vec![0.0; h];
        let mut d_rh = vec![0.0; h];

        for t in (0..t_len).rev() {
            let hp = &cache.h_prev[t * h..(t + 1) * h];
            let z = &cache.z[t * h..(t + 1) * h];
            let r = &cache.r[t * h..(t + 1) * h];
            let hc = &cache.hc[t * h..(t + 1) * h];
            let dg = &mut dgates[t * g..(t + 1) * g];

            let mut dh = dh_next.clone();
            for (a, b) in dh.iter_mut().zip(dout.row(t)) {
                *a += b;
            }

            for j in 0..h {
                let dz = dh[j] * (hc[j] - hp[j]);
                let dhc = dh[j] * z[j];
                dg[j] = dz * z[j] * (1.0 - z[j]);
                dg[2 * h + j] = dhc * (1.0 - hc[j] * hc[j]);
            }
            // d(r*h) = da_h Uh^T
            for (i, v) in d_rh.iter_mut().enumerate() {
                let urow = &u[i * g + 2 * h..(i + 1) * g];
                *v = urow.iter().zip(&dg[2 * h..]).map(|(a, b)| a * b).sum();
            }
            for j in 0..h {
                let dr = d_rh[j] * hp[j];
                dg[h + j] = dr * r[j] * (1.0 - r[j]);
            }
            for i in 0..h {
                let urow = &u[i * g..i * g + 2 * h];
                let via_gates: f64 = urow.iter().zip(&dg[..2 * h]).map(|(a, b)| a * b).sum();
                dh_next[i] = dh[i] * (1.0 - z[i]) + d_rh[i] * r[i] + via_gates;
            }
        }

        // dW = X^T dG, db = colsum(dG)
        gemm(din, t_len, g, cache.x.data(), true, &dgates, false, 1.0, self.w.grad.data_mut());
        let db = self.b.grad.data_mut();
        for row in dgates.chunks_exact(g) {
            for (a, b) in db.iter_mut().zip(row) {
                *a += b;
            }
        }
        // dU: zr block from h_prev, candidate block from r*h_prev
        let mut zr = vec![0.0; t_len * 2 * h];
        let mut cand = vec![0.0; t_len * h];
        let mut rh_prev = vec![0.0; t_len * h];
        for t in 0..t_len {
            zr[t * 2 * h..(t + 1) * 2 * h].copy_from_slice(&dgates[t * g..t * g + 2 * h]);
            cand[t * h..(t + 1) * h].copy_from_slice(&dgates[t * g + 2 * h..(t + 1) * g]);
            for j in 0..h {
                rh_prev[t * h + j] = cache.r[t * h + j] * cache.h_prev[t * h + j];
            }
        }
        let mut du_zr = vec![0.0; h * 2 * h];
        let mut du_c = vec![0.0; h * h];
        gemm(h, t_len, 2 * h, &cache.h_prev, true, &zr, false, 0.0, &mut du_zr);
        gemm(h, t_len, h, &rh_prev, true, &cand, false, 0.0, &mut du_c);
        let du = self.u.grad.data_mut();
        for i in 0..h {
            for j in 0..2 * h {
                du[i * g + j] += du_zr[i * 2 * h + j];
            }
            for j in 0..h {
                du[i * g + 2 * h + j] += du_c[i * h + j];
            }
        }

        let mut dx = vec![0.0; t_len * din];
        gemm(t_len, g, din, &dgates, false, self.w.value.data(), true, 0.0, &mut dx);
        Tensor::from_vec(&[t_len, din], dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.u, &self.b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}
