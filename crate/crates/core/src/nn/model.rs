//! The recognition networks.
//!
//! * `Fusion`: per-frame video CNN (conv, conv, pool, projection) in parallel
//!   with a three-layer GRU stack over the side features (EEG and/or MFCC);
//!   the two streams are concatenated per frame and fed through one temporal
//!   block and a softmax output layer.
//! * `VideoOnly`: the video CNN alone.
//! * `SideOnly`: the GRU stack alone (audio- or EEG-only baselines).

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{maxpool2d, maxpool2d_backward, Conv2d, Conv2dCache, MaxPoolCache, CONV_KERNEL_WIDTH, POOL_WIDTH};
use super::dropout::{dropout, dropout_backward};
use super::gru::{Gru, GruCache};
use super::tcn::{TcnBlock, TcnCache};
use super::{softmax, Dense, Initializer, Param, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    Fusion,
    VideoOnly,
    SideOnly,
}

impl ModelMode {
    pub fn uses_video(self) -> bool {
        matches!(self, ModelMode::Fusion | ModelMode::VideoOnly)
    }

    pub fn uses_side(self) -> bool {
        matches!(self, ModelMode::Fusion | ModelMode::SideOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: ModelMode,
    pub frame_height: usize,
    pub frame_width: usize,
    pub side_dim: usize,
    pub gru_sizes: Vec<usize>,
    pub dropout: f64,
    pub conv_filters: usize,
    pub video_embed: usize,
    pub tcn_filters: usize,
    /// Output classes including the CTC blank.
    pub classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Full-size topology: 100x100 frames, 100 conv filters, GRUs 128/64/32,
    /// 32-filter temporal block, 29 output classes.
    pub fn full_size(mode: ModelMode, side_dim: usize) -> Self {
        Self {
            mode,
            frame_height: 100,
            frame_width: 100,
            side_dim: if mode.uses_side() { side_dim } else { 0 },
            gru_sizes: vec![128, 64, 32],
            dropout: 0.1,
            conv_filters: 100,
            video_embed: 32,
            tcn_filters: 32,
            classes: 29,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.classes < 2 {
            return bad("need at least two output classes");
        }
        if self.mode.uses_video() {
            if self.frame_height == 0 || self.frame_width < 2 * CONV_KERNEL_WIDTH - 2 + POOL_WIDTH {
                return bad("video frames too small for conv-conv-pool");
            }
            if self.conv_filters == 0 || self.video_embed == 0 {
                return bad("video branch widths must be positive");
            }
        }
        if self.mode.uses_side() && (self.side_dim == 0 || self.gru_sizes.is_empty() || self.gru_sizes.contains(&0)) {
            return bad("side branch needs a positive input width and GRU sizes");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.tcn_filters == 0 {
            return bad("temporal block needs at least one filter");
        }
        Ok(())
    }

    fn pooled_width(&self) -> usize {
        (self.frame_width + 2 - 2 * CONV_KERNEL_WIDTH) / POOL_WIDTH
    }
}

#[derive(Debug, Clone)]
struct VideoBranch {
    conv1: Conv2d,
    conv2: Conv2d,
    projection: Dense,
}

#[derive(Debug, Clone)]
pub struct ModelGraph {
    config: ModelConfig,
    video: Option<VideoBranch>,
    grus: Vec<Gru>,
    tcn: TcnBlock,
    output: Dense,
}

/// How a forward pass runs.
pub enum Pass<'a> {
    /// No dropout, nothing recorded.
    Inference,
    /// No dropout, activations recorded for `backward`.
    Record,
    /// Dropout active, activations recorded.
    Train(&'a mut ChaCha8Rng),
}

struct VideoCache {
    conv1: Conv2dCache,
    conv2: Conv2dCache,
    pool: MaxPoolCache,
    pooled: Tensor,
}

struct Caches {
    video: Option<VideoCache>,
    grus: Vec<(GruCache, Option<Vec<f64>>)>,
    tcn: TcnCache,
    tcn_out: Tensor,
}

/// Result of a forward pass; carries the activations needed by [`ModelGraph::backward`].
pub struct Tape {
    pub logits: Tensor,
    pub probs: Tensor,
    caches: Option<Caches>,
}

impl Tape {
    pub fn frames(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_recorded(&self) -> bool {
        self.caches.is_some()
    }
}

impl ModelGraph {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut init = Initializer::new(config.seed);
        let video = config.mode.uses_video().then(|| {
            let conv1 = Conv2d::new(&mut init, "video.conv1", 1, config.conv_filters);
            let conv2 = Conv2d::new(&mut init, "video.conv2", config.conv_filters, config.conv_filters);
            let flat = config.frame_height * config.pooled_width() * config.conv_filters;
            let projection = Dense::new(&mut init, "video.projection", flat, config.video_embed);
            VideoBranch {
                conv1,
                conv2,
                projection,
            }
        });
        let mut grus = Vec::new();
        if config.mode.uses_side() {
            let mut input = config.side_dim;
            for (i, &h) in config.gru_sizes.iter().enumerate() {
                grus.push(Gru::new(&mut init, &format!("side.gru{}", i + 1), input, h));
                input = h;
            }
        }
        let concat = video.as_ref().map_or(0, |_| config.video_embed) + grus.last().map_or(0, Gru::hidden);
        let tcn = TcnBlock::new(&mut init, "tcn", concat, config.tcn_filters);
        let output = Dense::new(&mut init, "output", config.tcn_filters, config.classes);
        Ok(Self {
            config,
            video,
            grus,
            tcn,
            output,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn has_gru_branch(&self) -> bool {
        !self.grus.is_empty()
    }

    /// `video` is `[T, H, W]` (intensities already scaled), `side` is `[T, side_dim]`.
    pub fn forward(&self, video: Option<&Tensor>, side: Option<&Tensor>, pass: Pass<'_>) -> Result<(Tensor, Tape)> {
        let cfg = &self.config;
        let (record, mut rng) = match pass {
            Pass::Inference => (false, None),
            Pass::Record => (true, None),
            Pass::Train(r) => (true, Some(r)),
        };
        let frames = match (cfg.mode.uses_video(), video, cfg.mode.uses_side(), side) {
            (true, Some(v), true, Some(s)) => {
                if v.rows() != s.rows() {
                    return Err(Error::Shape(format!(
                        "video has {} frames but side features have {}",
                        v.rows(),
                        s.rows()
                    )));
                }
                v.rows()
            }
            (true, Some(v), false, None) => v.rows(),
            (false, None, true, Some(s)) => s.rows(),
            _ => {
                return Err(Error::Shape(format!(
                    "{:?} model got video={} side={}",
                    cfg.mode,
                    video.is_some(),
                    side.is_some()
                )))
            }
        };
        if frames == 0 {
            return Err(Error::Shape("empty input sequence".into()));
        }

        let mut parts: Vec<Tensor> = Vec::new();
        let mut video_cache = None;
        if let (Some(branch), Some(v)) = (&self.video, video) {
            if v.shape() != [frames, cfg.frame_height, cfg.frame_width] {
                return Err(Error::Shape(format!(
                    "video must be [T, {}, {}], got {:?}",
                    cfg.frame_height,
                    cfg.frame_width,
                    v.shape()
                )));
            }
            let x = Tensor::from_vec(&[frames, cfg.frame_height, cfg.frame_width, 1], v.data().to_vec())?;
            let (c1, c1_cache) = branch.conv1.forward(&x)?;
            let (c2, c2_cache) = branch.conv2.forward(&c1)?;
            let (pooled, pool_cache) = maxpool2d(&c2)?;
            parts.push(branch.projection.forward(&pooled)?);
            if record {
                video_cache = Some(VideoCache {
                    conv1: c1_cache,
                    conv2: c2_cache,
                    pool: pool_cache,
                    pooled,
                });
            }
        }

        let mut gru_caches = Vec::new();
        if let Some(s) = side {
            let mut h = s.clone();
            for gru in &self.grus {
                let (out, cache) = gru.forward(&h, None)?;
                let (dropped, mask) = match rng.as_deref_mut() {
                    Some(r) => dropout(&out, cfg.dropout, true, r)?,
                    None => (out, None),
                };
                if record {
                    gru_caches.push((cache, mask));
                }
                h = dropped;
            }
            parts.push(h);
        }

        let tcn_in = concat_columns(&parts)?;
        let (tcn_out, tcn_cache) = self.tcn.forward(&tcn_in)?;
        let logits = self.output.forward(&tcn_out)?;
        if !logits.all_finite() {
            return Err(Error::Numeric("non-finite logits in forward pass".into()));
        }
        let probs = softmax(&logits);
        let caches = record.then_some(Caches {
            video: video_cache,
            grus: gru_caches,
            tcn: tcn_cache,
            tcn_out,
        });
        Ok((
            probs.clone(),
            Tape {
                logits,
                probs,
                caches,
            },
        ))
    }

    /// Accumulate parameter gradients for `dL/dlogits`. The tape must come from
    /// a recorded pass over this model.
    pub fn backward(&mut self, tape: &Tape, dlogits: &Tensor) -> Result<()> {
        let caches = tape
            .caches
            .as_ref()
            .ok_or_else(|| Error::State("backward called on an unrecorded forward pass".into()))?;
        if dlogits.shape() != tape.logits.shape() {
            return Err(Error::Shape(format!(
                "logit gradient {:?} does not match logits {:?}",
                dlogits.shape(),
                tape.logits.shape()
            )));
        }
        if caches.video.is_some() != self.video.is_some() || caches.grus.len() != self.grus.len() {
            return Err(Error::State("tape was recorded on a different model".into()));
        }
        let d_tcn_out = self.output.backward(&caches.tcn_out, dlogits)?;
        let d_tcn_in = self.tcn.backward(&caches.tcn, &d_tcn_out)?;

        let frames = d_tcn_in.rows();
        let total = d_tcn_in.row_len();
        let video_width = if self.video.is_some() { self.config.video_embed } else { 0 };
        let split = |lo: usize, hi: usize| -> Result<Tensor> {
            let mut v = Vec::with_capacity(frames * (hi - lo));
            for t in 0..frames {
                v.extend_from_slice(&d_tcn_in.row(t)[lo..hi]);
            }
            Tensor::from_vec(&[frames, hi - lo], v)
        };

        if let (Some(branch), Some(vc)) = (&mut self.video, &caches.video) {
            let d_embed = split(0, video_width)?;
            let d_pooled = branch.projection.backward(&vc.pooled, &d_embed)?;
            let d_c2 = maxpool2d_backward(&vc.pool, &d_pooled)?;
            let d_c1 = branch.conv2.backward(&vc.conv2, &d_c2)?;
            branch.conv1.backward(&vc.conv1, &d_c1)?;
        }
        if !self.grus.is_empty() {
            let mut d = split(video_width, total)?;
            for (gru, (cache, mask)) in self.grus.iter_mut().zip(&caches.grus).rev() {
                let d_out = dropout_backward(&d, mask.as_deref());
                d = gru.backward(cache, &d_out)?;
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = Vec::new();
        if let Some(v) = &self.video {
            p.extend(v.conv1.conv.params());
            p.extend(v.conv2.conv.params());
            p.extend(v.projection.params());
        }
        for g in &self.grus {
            p.extend(g.params());
        }
        p.extend(self.tcn.params());
        p.extend(self.output.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::new();
        if let Some(v) = &mut self.video {
            p.extend(v.conv1.conv.params_mut());
            p.extend(v.conv2.conv.params_mut());
            p.extend(v.projection.params_mut());
        }
        for g in &mut self.grus {
            p.extend(g.params_mut());
        }
        p.extend(self.tcn.params_mut());
        p.extend(self.output.params_mut());
        p
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Replace parameter values by name; every parameter must be supplied with its exact shape.
    pub fn load_params(&mut self, values: &[(String, Tensor)]) -> Result<()> {
        let mut params = self.params_mut();
        if values.len() != params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} tensors, model expects {}",
                values.len(),
                params.len()
            )));
        }
        for (p, (name, t)) in params.iter_mut().zip(values) {
            if &p.name != name || p.value.shape() != t.shape() {
                return Err(Error::Config(format!(
                    "checkpoint tensor {name} {:?} does not match parameter {} {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }
}

fn concat_columns(parts: &[Tensor]) -> Result<Tensor> {
    match parts {
        [] => Err(Error::Shape("no branch produced features".into())),
        [one] => Ok(one.clone()),
        _ => {
            let rows = parts[0].rows();
            let width: usize = parts.iter().map(Tensor::row_len).sum();
            let mut data = Vec::with_capacity(rows * width);
            for t in 0..rows {
                for p in parts {
                    data.extend_from_slice(p.row(t));
                }
            }
            Tensor::from_vec(&[rows, width], data)
        }
    }
}
