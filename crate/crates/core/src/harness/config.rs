//! Feature conditions and training settings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nn::{AdamConfig, ModelConfig, ModelMode};
use crate::{Error, Result};

/// Which streams feed the recogniser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "video")]
    Video,
    #[serde(rename = "video+mfcc")]
    VideoMfcc,
    #[serde(rename = "video+eeg")]
    VideoEeg,
    #[serde(rename = "video+eeg+mfcc")]
    VideoEegMfcc,
    #[serde(rename = "mfcc")]
    Mfcc,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Video,
        Condition::VideoMfcc,
        Condition::VideoEeg,
        Condition::VideoEegMfcc,
        Condition::Mfcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Video => "video",
            Condition::VideoMfcc => "video+mfcc",
            Condition::VideoEeg => "video+eeg",
            Condition::VideoEegMfcc => "video+eeg+mfcc",
            Condition::Mfcc => "mfcc",
        }
    }

    pub fn uses_video(self) -> bool {
        self != Condition::Mfcc
    }

    pub fn uses_eeg(self) -> bool {
        matches!(self, Condition::VideoEeg | Condition::VideoEegMfcc)
    }

    pub fn uses_mfcc(self) -> bool {
        matches!(self, Condition::VideoMfcc | Condition::VideoEegMfcc | Condition::Mfcc)
    }

    pub fn mode(self) -> ModelMode {
        match self {
            Condition::Video => ModelMode::VideoOnly,
            Condition::Mfcc => ModelMode::SideOnly,
            _ => ModelMode::Fusion,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition {s:?}; expected one of video, video+mfcc, video+eeg, video+eeg+mfcc, mfcc")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub val_split: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale the averaged batch gradient to at most this global norm (0 disables).
    pub clip_norm: f64,
    pub seed: u64,
    pub conv_filters: usize,
    pub video_embed: usize,
    pub gru_sizes: Vec<usize>,
    pub tcn_filters: usize,
    pub dropout: f64,
}

impl Default for TrainConfig {
    /// Full-size network and schedule: 120 epochs, batches of 100.
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 120,
            batch_size: 100,
            val_split: 0.1,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            clip_norm: 0.0,
            seed: 0,
            conv_filters: 100,
            video_embed: 32,
            gru_sizes: vec![128, 64, 32],
            tcn_filters: 32,
            dropout: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_split) {
            return Err(Error::Config("val_split must be in [0, 1)".into()));
        }
        if !(self.lr > 0.0 && self.clip_norm >= 0.0) {
            return Err(Error::Config("lr must be positive and clip_norm non-negative".into()));
        }
        Ok(())
    }

    /// Network for `condition` given the frame size and side-feature width.
    pub fn model_config(&self, condition: Condition, frame: (usize, usize), side_dim: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            mode: condition.mode(),
            frame_height: if condition.uses_video() { frame.0 } else { 0 },
            frame_width: if condition.uses_video() { frame.1 } else { 0 },
            side_dim,
            gru_sizes: self.gru_sizes.clone(),
            dropout: self.dropout,
            conv_filters: self.conv_filters,
            video_embed: self.video_embed,
            tcn_filters: self.tcn_filters,
            classes,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.name().parse::<Condition>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert!("eeg".parse::<Condition>().is_err());
        assert_eq!(Condition::Video.mode(), ModelMode::VideoOnly);
    }
}
