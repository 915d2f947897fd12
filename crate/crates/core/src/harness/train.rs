//! CTC training loop.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::ctc::ctc_loss_from_log_probs;
use crate::nn::{log_softmax, AdamState, ModelConfig, ModelGraph, Pass, Tensor};
use crate::{Error, Result};

/// One utterance ready for the network.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub subject: usize,
    pub text: String,
    pub labels: Vec<usize>,
    /// `[T, H, W]`
    pub video: Option<Tensor>,
    /// `[T, D]`
    pub side: Option<Tensor>,
}

impl Sample {
    pub fn frames(&self) -> usize {
        self.video.as_ref().or(self.side.as_ref()).map_or(0, Tensor::rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-utterance CTC loss (nats) over the epoch's feasible training utterances.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Deterministic train/validation partition by seeded shuffle.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5641_4C49_4441_5445);
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let n_val = (n as f64 * fraction).floor() as usize;
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Mean CTC loss of `samples` without dropout; infeasible utterances are skipped.
pub fn mean_loss(model: &ModelGraph, samples: &[&Sample]) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in samples {
        let (_, tape) = model.forward(s.video.as_ref(), s.side.as_ref(), Pass::Inference)?;
        let r = ctc_loss_from_log_probs(&log_softmax(&tape.logits), &s.labels, tape.frames())?;
        if r.feasible {
            total += r.loss;
            count += 1;
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

/// Train a fresh model; `on_epoch` sees each epoch's statistics as they are produced.
pub fn train(
    samples: &[Sample],
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelGraph, Vec<EpochStats>)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Data("no training utterances".into()));
    }
    let mut model = ModelGraph::new(model_cfg)?;
    let (train_idx, val_idx) = validation_split(samples.len(), cfg.val_split, cfg.seed);
    let val: Vec<&Sample> = val_idx.iter().map(|&i| &samples[i]).collect();
    let mut adam = AdamState::new(cfg.adam(), &model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5452_4149_4E00_0000);
    let mut order = train_idx;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut total = 0.0;
        let mut feasible = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grad();
            let mut used = 0usize;
            for &i in batch {
                let s = &samples[i];
                let (_, tape) = model.forward(s.video.as_ref(), s.side.as_ref(), Pass::Train(&mut rng))?;
                let r = ctc_loss_from_log_probs(&log_softmax(&tape.logits), &s.labels, tape.frames())?;
                if !r.feasible {
                    continue;
                }
                total += r.loss;
                feasible += 1;
                used += 1;
                model.backward(&tape, &r.grad)?;
            }
            if used == 0 {
                continue;
            }
            let scale = 1.0 / used as f64;
            let mut params = model.params_mut();
            let mut norm_sq = 0.0;
            for p in params.iter_mut() {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
                norm_sq += p.grad.sum_sq();
            }
            if !norm_sq.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in epoch {epoch}")));
            }
            if cfg.clip_norm > 0.0 && norm_sq.sqrt() > cfg.clip_norm {
                let k = cfg.clip_norm / norm_sq.sqrt();
                for p in params.iter_mut() {
                    p.grad.data_mut().iter_mut().for_each(|g| *g *= k);
                }
            }
            adam.update(&mut params)?;
        }
        if feasible == 0 {
            return Err(Error::Data("no training utterance is long enough for its transcript".into()));
        }
        let stats = EpochStats {
            epoch,
            train_loss: total / feasible as f64,
            val_loss: if val.is_empty() { None } else { mean_loss(&model, &val)? },
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok((model, history))
}

/// `epoch,train_loss,val_loss` with one row per epoch.
pub fn loss_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for h in history {
        let val = h.val_loss.map_or_else(String::new, |v| format!("{v}"));
        s.push_str(&format!("{},{},{}\n", h.epoch, h.train_loss, val));
    }
    s
}

pub fn write_loss_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    fs::write(path, loss_csv(history)).map_err(|e| Error::io(path, e))
}
