//! Signal conditioning and per-frame feature extraction.

mod features;
mod filter;
mod mfcc;

pub use features::{
    extract_eeg_features, frame_windows, stat_features, EegRecording, StatFeatures,
    DEFAULT_WINDOW_MS, STAT_FEATURES_PER_CHANNEL,
};
pub use filter::{
    apply_filter, design_bandpass, design_notch, Biquad, BiquadCascade, DEFAULT_NOTCH_Q,
};
pub use mfcc::{extract_mfcc, log_mel_energies, AudioRecording, MfccConfig, AUDIO_SAMPLE_RATE_HZ};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What a [`FeatureSequence`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    EegStat,
    Mfcc,
    KpcaReduced,
    Concatenated,
    VideoEmbed,
}

/// Time-major `T x D` matrix of per-frame feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    frames: usize,
    dim: usize,
    pub frame_rate_hz: u32,
    pub kind: FeatureKind,
    /// Number of windows that hit the zero-variance rule in [`stat_features`].
    pub degenerate_windows: usize,
}

impl FeatureSequence {
    pub fn new(data: Vec<f64>, frames: usize, dim: usize, frame_rate_hz: u32, kind: FeatureKind) -> Result<Self> {
        if data.len() != frames * dim {
            return Err(Error::Shape(format!(
                "feature data has {} values, expected {frames} x {dim}",
                data.len()
            )));
        }
        if frame_rate_hz == 0 {
            return Err(Error::Parameter("frame rate must be positive".into()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature at frame {}, dim {}",
                i / dim.max(1),
                i % dim.max(1)
            )));
        }
        Ok(Self {
            data,
            frames,
            dim,
            frame_rate_hz,
            kind,
            degenerate_windows: 0,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_rate_hz: u32, kind: FeatureKind) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(data, rows.len(), dim, frame_rate_hz, kind)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.frames).map(move |t| self.row(t))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// First `frames` rows.
    pub fn truncated(&self, frames: usize) -> Self {
        let frames = frames.min(self.frames);
        Self {
            data: self.data[..frames * self.dim].to_vec(),
            frames,
            ..self.clone()
        }
    }

    /// Column-wise concatenation of equally long sequences.
    pub fn concat(parts: &[&FeatureSequence]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Parameter("nothing to concatenate".into()))?;
        let frames = first.frames;
        if parts.iter().any(|p| p.frames != frames) {
            return Err(Error::Shape("concatenated sequences differ in length".into()));
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut data = Vec::with_capacity(frames * dim);
        for t in 0..frames {
            for p in parts {
                data.extend_from_slice(p.row(t));
            }
        }
        Self::new(data, frames, dim, first.frame_rate_hz, FeatureKind::Concatenated)
    }
}
