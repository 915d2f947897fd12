//! Per-utterance feature pipeline shared by the CLI steps and the experiment.

use serde::{Deserialize, Serialize};

use super::synth::{Split, Utterance};
use crate::dsp::{
    design_bandpass, design_notch, extract_eeg_features, extract_mfcc, BiquadCascade, EegRecording, FeatureKind,
    FeatureSequence, MfccConfig,
};
use crate::kpca::{KernelParams, KpcaModel};
use crate::nn::Tensor;
use crate::video::{align_streams, downsample_area, VideoSequence};
use crate::{Error, Result, FRAME_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub bandpass_order: usize,
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    pub notch_hz: f64,
    pub notch_q: f64,
    pub window_ms: u32,
    /// Area-downsampling factor applied to the 100x100 frames before the CNN (1 keeps full size).
    pub video_factor: usize,
    pub kpca_components: usize,
    /// Training frames sampled (evenly strided) to fit the kernel PCA.
    pub kpca_fit_frames: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            bandpass_order: 4,
            bandpass_low_hz: 0.1,
            bandpass_high_hz: 70.0,
            notch_hz: 60.0,
            notch_q: crate::dsp::DEFAULT_NOTCH_Q,
            window_ms: 100,
            video_factor: 1,
            kpca_components: 30,
            kpca_fit_frames: 800,
        }
    }
}

/// Band-pass and notch filters designed once for a sampling rate.
#[derive(Debug, Clone)]
pub struct EegFrontEnd {
    pub bandpass: BiquadCascade,
    pub notch: BiquadCascade,
    pub window_ms: u32,
    pub sample_rate_hz: u32,
}

impl EegFrontEnd {
    pub fn new(cfg: &FeatureConfig, sample_rate_hz: u32) -> Result<Self> {
        let fs = sample_rate_hz as f64;
        Ok(Self {
            bandpass: design_bandpass(cfg.bandpass_order, cfg.bandpass_low_hz, cfg.bandpass_high_hz, fs)?,
            notch: design_notch(cfg.notch_hz, fs, cfg.notch_q)?,
            window_ms: cfg.window_ms,
            sample_rate_hz,
        })
    }

    pub fn extract(&self, rec: &EegRecording) -> Result<FeatureSequence> {
        if rec.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::Parameter(format!(
                "front end designed for {} Hz, recording is {} Hz",
                self.sample_rate_hz, rec.sample_rate_hz
            )));
        }
        extract_eeg_features(rec, &self.bandpass, &self.notch, self.window_ms)
    }
}

pub fn downsample_video(video: &VideoSequence, factor: usize) -> Result<VideoSequence> {
    if factor == 1 {
        return Ok(video.clone());
    }
    let (h, w) = (video.height / factor, video.width / factor);
    video.map_frames(h, w, |f| downsample_area(f, video.height, video.width, factor).expect("validated factor"))
}

/// Time-aligned feature streams of one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceFeatures {
    pub id: String,
    pub text: String,
    pub subject: usize,
    pub split: Split,
    pub video: VideoSequence,
    /// Statistical EEG features, replaced by their KPCA projection after [`reduce_eeg`].
    pub eeg: FeatureSequence,
    pub mfcc: FeatureSequence,
}

impl UtteranceFeatures {
    pub fn frames(&self) -> usize {
        self.video.len
    }
}

pub fn extract_utterance(u: &Utterance, front: &EegFrontEnd, cfg: &FeatureConfig) -> Result<UtteranceFeatures> {
    if cfg.video_factor == 0 || u.video.height < cfg.video_factor || u.video.width < cfg.video_factor {
        return Err(Error::Config(format!("video_factor {} does not fit the frames", cfg.video_factor)));
    }
    let eeg = front.extract(&u.eeg)?;
    let mfcc = extract_mfcc(&u.audio, &MfccConfig::default())?;
    let video = downsample_video(&u.video, cfg.video_factor)?;
    let (video, mut streams) = align_streams(&video, &[&eeg, &mfcc])?;
    let mfcc = streams.pop().expect("two streams");
    let eeg = streams.pop().expect("two streams");
    Ok(UtteranceFeatures {
        id: u.spec.id.clone(),
        text: u.spec.text.clone(),
        subject: u.spec.subject,
        split: u.spec.split,
        video,
        eeg,
        mfcc,
    })
}

/// Per-dimension z-scoring with statistics from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::Shape(format!("row of width {} where {dim} expected", r.len())));
            }
            n += 1;
            for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(r) {
                let d = x - *m;
                *m += d / n as f64;
                *s += d * (x - *m);
            }
        }
        if n == 0 {
            return Err(Error::Data("no rows to standardise".into()));
        }
        let std = m2.iter().map(|s| (s / n as f64).sqrt().max(1e-8)).collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_rows(&self, data: &[f64]) -> Vec<f64> {
        data.chunks_exact(self.dim())
            .flat_map(|r| r.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s))
            .collect()
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        if seq.dim() != self.dim() {
            return Err(Error::Shape(format!("standardiser width {} vs features {}", self.dim(), seq.dim())));
        }
        FeatureSequence::new(self.apply_rows(seq.as_slice()), seq.frames(), seq.dim(), seq.frame_rate_hz, seq.kind)
    }
}

/// Evenly strided subsample of at most `count` rows drawn from `seqs`.
pub fn strided_rows(seqs: &[&FeatureSequence], count: usize) -> Vec<f64> {
    let total: usize = seqs.iter().map(|s| s.frames()).sum();
    let take = count.min(total);
    let mut out = Vec::new();
    if take == 0 {
        return out;
    }
    let mut next = 0usize;
    let mut k = 0usize;
    let mut index = 0usize;
    for s in seqs {
        for r in s.rows() {
            if index == next && k < take {
                out.extend_from_slice(r);
                k += 1;
                next = k * total / take;
            }
            index += 1;
        }
    }
    out
}

/// EEG reducer: z-score the statistical features, then kernel PCA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegReducer {
    pub standardizer: Standardizer,
    pub kpca: KpcaModel,
}

impl EegReducer {
    pub fn fit(train: &[&FeatureSequence], cfg: &FeatureConfig) -> Result<Self> {
        let dim = train.first().map(|s| s.dim()).ok_or_else(|| Error::Data("no training EEG features".into()))?;
        let standardizer = Standardizer::fit(train.iter().flat_map(|s| s.rows()), dim)?;
        let sample = standardizer.apply_rows(&strided_rows(train, cfg.kpca_fit_frames));
        let kpca = KpcaModel::fit(&sample, dim, cfg.kpca_components, KernelParams::cubic(dim))?;
        Ok(Self { standardizer, kpca })
    }

    pub fn reduce(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        let z = self.standardizer.apply_rows(seq.as_slice());
        let data = self.kpca.transform_rows(&z)?;
        FeatureSequence::new(data, seq.frames(), self.kpca.n_components, FRAME_RATE_HZ, FeatureKind::KpcaReduced)
    }
}

/// Replace every utterance's EEG stream with its reduced version.
pub fn reduce_eeg(utts: &mut [UtteranceFeatures], reducer: &EegReducer) -> Result<()> {
    for u in utts {
        u.eeg = reducer.reduce(&u.eeg)?;
    }
    Ok(())
}

/// Video frames as `[T, H, W]` intensities in `[0, 1]`.
pub fn video_tensor(v: &VideoSequence) -> Result<Tensor> {
    Tensor::from_vec(&[v.len, v.height, v.width], v.to_unit_f64())
}
