//! MFCC front end: pre-emphasis, Hamming window, power spectrum, triangular
//! mel filterbank, log, orthonormal DCT-II.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FeatureKind, FeatureSequence};
use crate::{Error, Result, FRAME_RATE_HZ};

pub const AUDIO_SAMPLE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioRecording {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub pre_emphasis: f64,
    pub window: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub n_coeffs: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            pre_emphasis: 0.97,
            window: 400,
            hop: 160,
            n_fft: 512,
            n_mels: 26,
            f_min: 0.0,
            f_max: 8000.0,
            n_coeffs: 13,
            log_floor: 1e-10,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `n_mels x (n_fft/2 + 1)` triangular weights evaluated at bin centre frequencies.
fn mel_filterbank(cfg: &MfccConfig, fs: f64) -> Vec<Vec<f64>> {
    let bins = cfg.n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    (0..cfg.n_mels)
        .map(|m| {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * fs / cfg.n_fft as f64;
                    if f > left && f <= centre {
                        (f - left) / (centre - left)
                    } else if f > centre && f < right {
                        (right - f) / (right - centre)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

struct MelFrontEnd {
    cfg: MfccConfig,
    window: Vec<f64>,
    bank: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MelFrontEnd {
    fn new(cfg: &MfccConfig, fs: f64) -> Result<Self> {
        if cfg.window < 2 || cfg.window > cfg.n_fft || cfg.hop == 0 || cfg.n_coeffs > cfg.n_mels {
            return Err(Error::Parameter(format!("inconsistent MFCC configuration {cfg:?}")));
        }
        let n = cfg.window;
        let window = (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            window,
            bank: mel_filterbank(cfg, fs),
            fft: FftPlanner::new().plan_fft_forward(cfg.n_fft),
        })
    }

    fn frame_count(&self, len: usize) -> usize {
        if len < self.cfg.window {
            0
        } else {
            (len - self.cfg.window) / self.cfg.hop + 1
        }
    }

    /// Log mel energies of every frame of the pre-emphasised signal.
    fn log_mel(&self, emphasised: &[f64]) -> Vec<Vec<f64>> {
        let cfg = &self.cfg;
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
        (0..self.frame_count(emphasised.len()))
            .map(|t| {
                let start = t * cfg.hop;
                buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (i, (b, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                    *b = Complex64::new(emphasised[start + i] * w, 0.0);
                }
                self.fft.process(&mut buf);
                let power: Vec<f64> = buf[..cfg.n_fft / 2 + 1]
                    .iter()
                    .map(|c| c.norm_sqr() / cfg.n_fft as f64)
                    .collect();
                self.bank
                    .iter()
                    .map(|filt| {
                        let e: f64 = filt.iter().zip(&power).map(|(a, b)| a * b).sum();
                        e.max(cfg.log_floor).ln()
                    })
                    .collect()
            })
            .collect()
    }
}

fn pre_emphasise(x: &[f64], coeff: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &v in x {
        y.push(v - coeff * prev);
        prev = v;
    }
    y
}

fn check_audio(audio: &AudioRecording) -> Result<()> {
    if audio.sample_rate_hz != AUDIO_SAMPLE_RATE_HZ {
        return Err(Error::Parameter(format!(
            "audio must be sampled at {AUDIO_SAMPLE_RATE_HZ} Hz, got {}",
            audio.sample_rate_hz
        )));
    }
    if let Some(i) = audio.samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite audio sample at index {i}")));
    }
    Ok(())
}

/// Per-frame log mel filterbank energies (before the DCT).
pub fn log_mel_energies(audio: &AudioRecording, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    check_audio(audio)?;
    let fe = MelFrontEnd::new(cfg, audio.sample_rate_hz as f64)?;
    Ok(fe.log_mel(&pre_emphasise(&audio.samples, cfg.pre_emphasis)))
}

/// Orthonormal DCT-II, first `keep` coefficients.
fn dct2(x: &[f64], keep: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..keep)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(n, v)| v * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * m)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// 13 cepstral coefficients (c0 included) every 10 ms from 16 kHz audio.
pub fn extract_mfcc(audio: &AudioRecording, cfg: &MfccConfig) -> Result<FeatureSequence> {
    let rows: Vec<Vec<f64>> = log_mel_energies(audio, cfg)?
        .iter()
        .map(|e| dct2(e, cfg.n_coeffs))
        .collect();
    let frames = rows.len();
    let data = rows.into_iter().flatten().collect();
    FeatureSequence::new(data, frames, cfg.n_coeffs, FRAME_RATE_HZ, FeatureKind::Mfcc)
}
