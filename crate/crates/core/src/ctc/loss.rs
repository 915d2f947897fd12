//! CTC negative log-likelihood with its gradient, computed by the log-space
//! forward-backward recursions over the blank-interleaved label.

use super::{log_add, BLANK};
use crate::nn::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CtcResult {
    /// `-ln P(label | input)` in nats; `+inf` when no alignment exists.
    pub loss: f64,
    /// `dloss/dlogits`, same shape as the input; rows past the true length are zero.
    pub grad: Tensor,
    pub feasible: bool,
}

/// Loss from softmax outputs `probs` (`T x C`) using the first `frames` rows.
pub fn ctc_loss(probs: &Tensor, label: &[usize], frames: usize) -> Result<CtcResult> {
    let mut log_probs = probs.clone();
    log_probs.data_mut().iter_mut().for_each(|p| *p = p.ln());
    ctc_loss_from_log_probs(&log_probs, label, frames)
}

/// Minimum frames needed: one per symbol plus a blank between repeats.
pub fn min_frames(label: &[usize]) -> usize {
    label.len() + label.windows(2).filter(|w| w[0] == w[1]).count()
}

pub fn ctc_loss_from_log_probs(log_probs: &Tensor, label: &[usize], frames: usize) -> Result<CtcResult> {
    let shape = log_probs.shape();
    if shape.len() != 2 {
        return Err(Error::Shape(format!("CTC expects a T x C matrix, got {shape:?}")));
    }
    let (rows, classes) = (shape[0], shape[1]);
    if frames > rows {
        return Err(Error::Parameter(format!("true length {frames} exceeds {rows} rows")));
    }
    if let Some(&bad) = label.iter().find(|&&l| l == BLANK || l >= classes) {
        return Err(Error::Parameter(format!(
            "label symbol {bad} is the blank or outside 1..{classes}"
        )));
    }

    let mut grad = Tensor::zeros(shape);
    if frames == 0 || frames < min_frames(label) {
        return Ok(CtcResult {
            loss: f64::INFINITY,
            grad,
            feasible: false,
        });
    }

    let ext: Vec<usize> = std::iter::once(BLANK)
        .chain(label.iter().flat_map(|&l| [l, BLANK]))
        .collect();
    let s_len = ext.len();
    let lp = |t: usize, c: usize| log_probs.data()[t * classes + c];
    let can_skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; frames * s_len];
    alpha[0] = lp(0, ext[0]);
    if s_len > 1 {
        alpha[1] = lp(0, ext[1]);
    }
    for t in 1..frames {
        for s in 0..s_len {
            let prev = &alpha[(t - 1) * s_len..t * s_len];
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(s) {
                acc = log_add(acc, prev[s - 2]);
            }
            alpha[t * s_len + s] = acc + lp(t, ext[s]);
        }
    }

    let mut beta = vec![neg; frames * s_len];
    let last = (frames - 1) * s_len;
    beta[last + s_len - 1] = 0.0;
    if s_len > 1 {
        beta[last + s_len - 2] = 0.0;
    }
    for t in (0..frames - 1).rev() {
        for s in 0..s_len {
            let next = (t + 1) * s_len;
            let mut acc = beta[next + s] + lp(t + 1, ext[s]);
            if s + 1 < s_len {
                acc = log_add(acc, beta[next + s + 1] + lp(t + 1, ext[s + 1]));
            }
            if s + 2 < s_len && can_skip(s + 2) {
                acc = log_add(acc, beta[next + s + 2] + lp(t + 1, ext[s + 2]));
            }
            beta[t * s_len + s] = acc;
        }
    }

    let end = &alpha[last..last + s_len];
    let log_p = if s_len > 1 {
        log_add(end[s_len - 1], end[s_len - 2])
    } else {
        end[0]
    };
    if log_p == neg {
        return Ok(CtcResult {
            loss: f64::INFINITY,
            grad,
            feasible: false,
        });
    }

    let g = grad.data_mut();
    for t in 0..frames {
        let row = &mut g[t * classes..(t + 1) * classes];
        for (c, v) in row.iter_mut().enumerate() {
            *v = lp(t, c).exp();
        }
        for s in 0..s_len {
            let occ = alpha[t * s_len + s] + beta[t * s_len + s] - log_p;
            if occ > neg {
                row[ext[s]] -= occ.exp();
            }
        }
    }
    Ok(CtcResult {
        loss: -log_p,
        grad,
        feasible: true,
    })
}
