#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eegvsr::ctc::ctc_loss_from_log_probs;
use eegvsr::harness::relative_error;
use eegvsr::kpca::KernelParams;
use eegvsr::nn::{
    log_softmax, maxpool2d, maxpool2d_backward, CausalConv1d, Conv2d, Dense, Gru, Initializer, Param, TcnBlock, Tensor,
};

pub const FD_EPS: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FdStats {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries where a ReLU or max switch falls inside the step.
    pub kinks: usize,
}

impl FdStats {
    pub fn merge(&mut self, other: FdStats) {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.checked += other.checked;
        self.kinks += other.kinks;
    }
}

/// Central differences of `eval(i, delta)` (loss with entry `i` shifted by
/// `delta`) against `analytic`. Entries whose central difference changes
/// between `eps` and `eps / 2` straddle a kink and are skipped.
pub fn fd_check(analytic: &[f64], eps: f64, mut eval: impl FnMut(usize, f64) -> f64) -> FdStats {
    let mut s = FdStats::default();
    for (i, &a) in analytic.iter().enumerate() {
        let cd = (eval(i, eps) - eval(i, -eps)) / (2.0 * eps);
        let cd_half = (eval(i, eps / 2.0) - eval(i, -eps / 2.0)) / eps;
        if relative_error(cd, cd_half, 1e-6) > 1e-4 {
            s.kinks += 1;
            continue;
        }
        s.checked += 1;
        s.max_rel_error = s.max_rel_error.max(relative_error(a, cd, 1e-6));
    }
    s
}

/// `sum(w * y)`
pub fn weighted_sum(y: &Tensor, w: &Tensor) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

pub fn shifted(t: &Tensor, i: usize, delta: f64) -> Tensor {
    let mut c = t.clone();
    c.data_mut()[i] += delta;
    c
}

/// Exact `-ln` of the summed probability of every alignment of `label`,
/// by enumerating all `C^T` paths.
pub fn brute_force_ctc(probs: &[Vec<f64>], label: &[usize]) -> f64 {
    let t = probs.len();
    let c = probs[0].len();
    let mut total = 0.0;
    let mut path = vec![0usize; t];
    loop {
        if collapse(&path) == label {
            total += path.iter().enumerate().map(|(i, &k)| probs[i][k]).product::<f64>();
        }
        let mut i = 0;
        loop {
            if i == t {
                return -total.ln();
            }
            path[i] += 1;
            if path[i] < c {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = usize::MAX;
    for &k in path {
        if k != prev && k != 0 {
            out.push(k);
        }
        prev = k;
    }
    out
}

/// Every labelling reachable in `t` frames with its total probability.
pub fn labelling_probabilities(probs: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let t = probs.len();
    let c = probs[0].len();
    let mut map: std::collections::BTreeMap<Vec<usize>, f64> = std::collections::BTreeMap::new();
    let mut path = vec![0usize; t];
    loop {
        let p: f64 = path.iter().enumerate().map(|(i, &k)| probs[i][k]).product();
        *map.entry(collapse(&path)).or_insert(0.0) += p;
        let mut i = 0;
        loop {
            if i == t {
                return map.into_iter().collect();
            }
            path[i] += 1;
            if path[i] < c {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Random probability rows with a softmax of uniform logits in `[-2, 2]`.
pub fn random_probs(t: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| {
            let l: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: f64 = l.iter().map(|v| v.exp()).sum();
            l.iter().map(|v| v.exp() / z).collect()
        })
        .collect()
}

pub fn probs_tensor(rows: &[Vec<f64>]) -> Tensor {
    Tensor::from_vec(&[rows.len(), rows[0].len()], rows.iter().flatten().copied().collect()).unwrap()
}

/// Cyclic Jacobi rotations; returns eigenvalues and column eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

pub fn centred_gram(points: &[Vec<f64>], p: &KernelParams) -> Vec<Vec<f64>> {
    let n = points.len();
    let k = |x: &[f64], y: &[f64]| {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (p.gamma * dot + p.coef0).powi(p.degree as i32)
    };
    let g: Vec<Vec<f64>> = points.iter().map(|x| points.iter().map(|y| k(x, y)).collect()).collect();
    let row: Vec<f64> = g.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    (0..n).map(|i| (0..n).map(|j| g[i][j] - row[i] - row[j] + all).collect()).collect()
}


pub fn randomize(params: Vec<&mut Param>, rng: &mut ChaCha8Rng) {
    for p in params {
        p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        p.grad.fill(0.0);
    }
}

/// Checks input and parameter gradients of a layer under `L = sum(w * y)`.
pub fn check_layer<L: Clone>(
    layer: &L,
    x: &Tensor,
    grads: impl Fn(&L) -> Vec<&Param>,
    grads_mut: impl Fn(&mut L) -> Vec<&mut Param>,
    loss: impl Fn(&L, &Tensor) -> f64,
    dx: &Tensor,
) -> FdStats {
    let mut stats = fd_check(dx.data(), FD_EPS, |i, d| loss(layer, &shifted(x, i, d)));
    let analytic: Vec<Vec<f64>> = grads(layer).iter().map(|p| p.grad.data().to_vec()).collect();
    for (k, a) in analytic.iter().enumerate() {
        stats.merge(fd_check(a, FD_EPS, |i, d| {
            let mut l = layer.clone();
            grads_mut(&mut l)[k].value.data_mut()[i] += d;
            loss(&l, x)
        }));
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Dense,
    Gru,
    Conv2d,
    MaxPool,
    CausalConv,
    TcnProjected,
    TcnIdentity,
    CtcSoftmax,
}

impl Layer {
    pub const ALL: [Layer; 8] = [
        Layer::Dense,
        Layer::Gru,
        Layer::Conv2d,
        Layer::MaxPool,
        Layer::CausalConv,
        Layer::TcnProjected,
        Layer::TcnIdentity,
        Layer::CtcSoftmax,
    ];
}

/// Finite-difference check of one random tiny instance of `layer`.
pub fn layer_fd(layer: Layer, seed: u64) -> FdStats {
    let mut r = rng(seed);
    let mut init = Initializer::new(seed);
    match layer {
        Layer::Dense => {
            let mut l = Dense::new(&mut init, "d", 4, 3);
            randomize(l.params_mut(), &mut r);
            let x = random_tensor(&[5, 4], -1.0, 1.0, &mut r);
            let w = random_tensor(&[5, 3], -1.0, 1.0, &mut r);
            let dx = l.backward(&x, &w).unwrap();
            check_layer(&l, &x, |l| l.params(), |l| l.params_mut(), |l, x| weighted_sum(&l.forward(x).unwrap(), &w), &dx)
        }
        Layer::Gru => {
            let mut l = Gru::new(&mut init, "g", 3, 4);
            randomize(l.params_mut(), &mut r);
            let x = random_tensor(&[5, 3], -1.0, 1.0, &mut r);
            let w = random_tensor(&[5, 4], -1.0, 1.0, &mut r);
            let (_, cache) = l.forward(&x, None).unwrap();
            let dx = l.backward(&cache, &w).unwrap();
            check_layer(&l, &x, |l| l.params(), |l| l.params_mut(), |l, x| weighted_sum(&l.forward(x, None).unwrap().0, &w), &dx)
        }
        Layer::Conv2d => {
            let mut l = Conv2d::new(&mut init, "c", 2, 3);
            randomize(l.conv.params_mut(), &mut r);
            let x = random_tensor(&[2, 3, 6, 2], -1.0, 1.0, &mut r);
            let w = random_tensor(&[2, 3, 4, 3], -1.0, 1.0, &mut r);
            let (_, cache) = l.forward(&x).unwrap();
            let dx = l.backward(&cache, &w).unwrap();
            check_layer(&l, &x, |l| l.conv.params(), |l| l.conv.params_mut(), |l, x| weighted_sum(&l.forward(x).unwrap().0, &w), &dx)
        }
        Layer::MaxPool => {
            let x = random_tensor(&[2, 3, 7, 2], -1.0, 1.0, &mut r);
            let w = random_tensor(&[2, 3, 3, 2], -1.0, 1.0, &mut r);
            let (_, cache) = maxpool2d(&x).unwrap();
            let dx = maxpool2d_backward(&cache, &w).unwrap();
            fd_check(dx.data(), FD_EPS, |i, d| weighted_sum(&maxpool2d(&shifted(&x, i, d)).unwrap().0, &w))
        }
        Layer::CausalConv => {
            let mut l = CausalConv1d::new(&mut init, "k", 3, 2, 3);
            randomize(l.conv.params_mut(), &mut r);
            let x = random_tensor(&[6, 2], -1.0, 1.0, &mut r);
            let w = random_tensor(&[6, 3], -1.0, 1.0, &mut r);
            let (_, cache) = l.forward(&x).unwrap();
            let dx = l.backward(&cache, &w).unwrap();
            check_layer(&l, &x, |l| l.conv.params(), |l| l.conv.params_mut(), |l, x| weighted_sum(&l.forward(x).unwrap().0, &w), &dx)
        }
        Layer::TcnProjected | Layer::TcnIdentity => {
            let input = if layer == Layer::TcnProjected { 3 } else { 4 };
            let mut l = TcnBlock::new(&mut init, "t", input, 4);
            randomize(l.params_mut(), &mut r);
            let x = random_tensor(&[6, input], -1.0, 1.0, &mut r);
            let w = random_tensor(&[6, 4], -1.0, 1.0, &mut r);
            let (_, cache) = l.forward(&x).unwrap();
            let dx = l.backward(&cache, &w).unwrap();
            check_layer(&l, &x, |l| l.params(), |l| l.params_mut(), |l, x| weighted_sum(&l.forward(x).unwrap().0, &w), &dx)
        }
        Layer::CtcSoftmax => {
            let logits = random_tensor(&[6, 4], -2.0, 2.0, &mut r);
            let label: Vec<usize> = (0..r.random_range(1..=3)).map(|_| r.random_range(1..4)).collect();
            let res = ctc_loss_from_log_probs(&log_softmax(&logits), &label, 6).unwrap();
            fd_check(res.grad.data(), FD_EPS, |i, d| {
                ctc_loss_from_log_probs(&log_softmax(&shifted(&logits, i, d)), &label, 6).unwrap().loss
            })
        }
    }
}
