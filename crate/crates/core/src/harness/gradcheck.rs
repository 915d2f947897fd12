//! Finite-difference check of the full network's CTC gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctc::ctc_loss_from_log_probs;
use crate::nn::{log_softmax, ModelConfig, ModelGraph, ModelMode, Pass, Tensor};
use crate::{Error, Result};

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub mode: ModelMode,
    pub parameters_checked: usize,
    /// Entries skipped because a ReLU or max-pool kink lies within the step.
    pub kinks_skipped: usize,
    pub max_relative_error: f64,
    /// Parameter tensor holding the worst entry.
    pub worst_parameter: String,
}

/// Tiny model: T = 4, 8x8 frames, C = 4.
pub fn tiny_config(mode: ModelMode, seed: u64) -> ModelConfig {
    ModelConfig {
        mode,
        frame_height: if mode.uses_video() { 8 } else { 0 },
        frame_width: if mode.uses_video() { 8 } else { 0 },
        side_dim: if mode.uses_side() { 3 } else { 0 },
        gru_sizes: vec![5, 4],
        dropout: 0.0,
        conv_filters: 2,
        video_embed: 3,
        tcn_filters: 3,
        classes: 4,
        seed,
    }
}

fn ctc_objective(model: &ModelGraph, video: Option<&Tensor>, side: Option<&Tensor>, label: &[usize]) -> Result<f64> {
    let (_, tape) = model.forward(video, side, Pass::Inference)?;
    Ok(ctc_loss_from_log_probs(&log_softmax(&tape.logits), label, tape.frames())?.loss)
}

/// Compare every parameter gradient with central differences (step `eps`).
pub fn model_gradcheck(mode: ModelMode, seed: u64, eps: f64) -> Result<GradcheckReport> {
    let cfg = tiny_config(mode, seed);
    let mut model = ModelGraph::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    // lift weights off the Glorot scale so the check is not dominated by tiny gradients
    for p in model.params_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
    }
    let t = 4;
    let video = mode
        .uses_video()
        .then(|| Tensor::from_vec(&[t, 8, 8], (0..t * 64).map(|_| rng.random_range(0.0..1.0)).collect()))
        .transpose()?;
    let side = mode
        .uses_side()
        .then(|| Tensor::from_vec(&[t, 3], (0..t * 3).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .transpose()?;
    let label = vec![rng.random_range(1..4), rng.random_range(1..4)];

    let (_, tape) = model.forward(video.as_ref(), side.as_ref(), Pass::Record)?;
    let r = ctc_loss_from_log_probs(&log_softmax(&tape.logits), &label, t)?;
    if !r.feasible {
        return Err(Error::Data("gradcheck label is infeasible".into()));
    }
    model.zero_grad();
    model.backward(&tape, &r.grad)?;
    let analytic: Vec<(String, Vec<f64>)> = model.params().iter().map(|p| (p.name.clone(), p.grad.data().to_vec())).collect();

    let mut worst = (0.0f64, String::new());
    let mut checked = 0usize;
    let mut kinks = 0usize;
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = model.params()[pi].value.data()[i];
            let mut at = |delta: f64| -> Result<f64> {
                model.params_mut()[pi].value.data_mut()[i] = orig + delta;
                let v = ctc_objective(&model, video.as_ref(), side.as_ref(), &label);
                model.params_mut()[pi].value.data_mut()[i] = orig;
                v
            };
            let (up, down) = (at(eps)?, at(-eps)?);
            let (up_h, down_h) = (at(eps / 2.0)?, at(-eps / 2.0)?);
            // on a smooth stretch the two central differences agree to O(eps^2);
            // a ReLU or max-pool switch inside the step pulls them apart
            let (cd, cd_h) = ((up - down) / (2.0 * eps), (up_h - down_h) / eps);
            if relative_error(cd, cd_h, 1e-6) > 1e-4 {
                kinks += 1;
                continue;
            }
            let err = relative_error(a, (up - down) / (2.0 * eps), 1e-6);
            checked += 1;
            if err > worst.0 {
                worst = (err, name.clone());
            }
        }
    }
    Ok(GradcheckReport {
        seed,
        mode,
        parameters_checked: checked,
        kinks_skipped: kinks,
        max_relative_error: worst.0,
        worst_parameter: worst.1,
    })
}
