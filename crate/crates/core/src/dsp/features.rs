//! Windowed statistical EEG features: RMS, zero-crossing rate, moving-window
//! average, kurtosis and power spectral entropy, five per channel.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{apply_filter, BiquadCascade, FeatureKind, FeatureSequence};
use crate::{Error, Result, FRAME_RATE_HZ};

pub const STAT_FEATURES_PER_CHANNEL: usize = 5;
pub const DEFAULT_WINDOW_MS: u32 = 100;

/// Multichannel raw EEG, one `Vec` per channel (µV).
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: u32,
}

impl EegRecording {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Parameter("EEG sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::Data("EEG recording has no channels".into()));
        }
        let len = channels[0].len();
        if let Some(c) = channels.iter().position(|ch| ch.len() != len) {
            return Err(Error::Data(format!(
                "channel {c} has {} samples, channel 0 has {len}",
                channels[c].len()
            )));
        }
        Ok(Self {
            channels,
            sample_rate_hz,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Split `x` into windows of `window_ms` advancing by `fs / frame_rate` samples.
///
/// Produces `ceil(len / hop)` windows; windows running past the end are
/// zero-padded on the right.
pub fn frame_windows(x: &[f64], fs_hz: u32, frame_rate_hz: u32, window_ms: u32) -> Result<Vec<Vec<f64>>> {
    if frame_rate_hz == 0 || fs_hz % frame_rate_hz != 0 {
        return Err(Error::Parameter(format!(
            "sample rate {fs_hz} is not a multiple of frame rate {frame_rate_hz}"
        )));
    }
    let hop = (fs_hz / frame_rate_hz) as usize;
    let win = (window_ms as u64 * fs_hz as u64 / 1000) as usize;
    if win == 0 {
        return Err(Error::Parameter("window length rounds to zero samples".into()));
    }
    let count = x.len().div_ceil(hop);
    Ok((0..count)
        .map(|i| {
            let start = i * hop;
            let end = (start + win).min(x.len());
            let mut w = Vec::with_capacity(win);
            w.extend_from_slice(&x[start..end]);
            w.resize(win, 0.0);
            w
        })
        .collect())
}

/// The five per-window statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatFeatures {
    pub rms: f64,
    pub zcr: f64,
    pub mwa: f64,
    /// Pearson kurtosis `m4 / m2^2` (not excess).
    pub kurtosis: f64,
    /// Natural-log entropy of the DC-free normalised one-sided periodogram.
    pub pse: f64,
    /// Window had zero variance; kurtosis and pse were set to 0.
    pub degenerate: bool,
}

impl StatFeatures {
    pub fn to_array(&self) -> [f64; STAT_FEATURES_PER_CHANNEL] {
        [self.rms, self.zcr, self.mwa, self.kurtosis, self.pse]
    }
}

pub fn stat_features(w: &[f64]) -> Result<StatFeatures> {
    let fft = FftPlanner::new().plan_fft_forward(w.len().max(1));
    stat_features_with(w, &fft)
}

fn stat_features_with(w: &[f64], fft: &Arc<dyn Fft<f64>>) -> Result<StatFeatures> {
    let n = w.len();
    if n < 2 {
        return Err(Error::Parameter(format!("window needs at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = w.iter().sum::<f64>() / nf;
    let mean_sq = w.iter().map(|v| v * v).sum::<f64>() / nf;
    let rms = mean_sq.sqrt();

    let (m2, m4) = w.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / nf, m4 / nf);
    let degenerate = m2 <= 1e-20 * mean_sq || m2 == 0.0;

    let (kurtosis, pse) = if degenerate {
        (0.0, 0.0)
    } else {
        (m4 / (m2 * m2), spectral_entropy(w, fft))
    };

    Ok(StatFeatures {
        rms,
        zcr: zero_crossing_rate(w),
        mwa: mean,
        kurtosis,
        pse,
        degenerate,
    })
}

/// Strict sign changes between consecutive samples over `N - 1`; zeros keep
/// the sign of the last non-zero sample.
fn zero_crossing_rate(w: &[f64]) -> f64 {
    let mut crossings = 0usize;
    let mut prev_sign = 0i8;
    for &v in w {
        let sign = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            prev_sign
        };
        if sign != 0 && prev_sign != 0 && sign != prev_sign {
            crossings += 1;
        }
        if sign != 0 {
            prev_sign = sign;
        }
    }
    crossings as f64 / (w.len() - 1) as f64
}

fn spectral_entropy(w: &[f64], fft: &Arc<dyn Fft<f64>>) -> f64 {
    let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let power: Vec<f64> = buf[1..=w.len() / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -power
        .iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Band-pass, notch, frame and summarise every channel; channel blocks of
/// five features are concatenated in channel order.
pub fn extract_eeg_features(
    rec: &EegRecording,
    bandpass: &BiquadCascade,
    notch: &BiquadCascade,
    window_ms: u32,
) -> Result<FeatureSequence> {
    let channels = rec.channel_count();
    let len = rec.len();
    if let Some(c) = rec.channels.iter().position(|ch| ch.len() != len) {
        return Err(Error::Data(format!("channel {c} length differs from channel 0")));
    }
    let hop = (rec.sample_rate_hz / FRAME_RATE_HZ) as usize;
    let frames = len.div_ceil(hop.max(1));
    let dim = STAT_FEATURES_PER_CHANNEL * channels;
    let mut data = vec![0.0; frames * dim];
    let mut degenerate = 0;

    let win = (window_ms as u64 * rec.sample_rate_hz as u64 / 1000) as usize;
    let fft = FftPlanner::new().plan_fft_forward(win.max(1));
    for (c, raw) in rec.channels.iter().enumerate() {
        let filtered = apply_filter(&apply_filter(raw, bandpass)?, notch)?;
        let windows = frame_windows(&filtered, rec.sample_rate_hz, FRAME_RATE_HZ, window_ms)?;
        for (t, w) in windows.iter().enumerate() {
            let f = stat_features_with(w, &fft)?;
            degenerate += f.degenerate as usize;
            let off = t * dim + c * STAT_FEATURES_PER_CHANNEL;
            data[off..off + STAT_FEATURES_PER_CHANNEL].copy_from_slice(&f.to_array());
        }
    }
    let mut seq = FeatureSequence::new(data, frames, dim, FRAME_RATE_HZ, FeatureKind::EegStat)?;
    seq.degenerate_windows = degenerate;
    Ok(seq)
}
