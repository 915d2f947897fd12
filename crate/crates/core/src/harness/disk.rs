//! File-based pipeline steps behind the command-line tool. Each step reads
//! the manifest, writes `MTNS` tensors next to it and records their paths.

use std::fs;
use std::path::Path;

use super::checkpoint::{load_checkpoint, load_reducer, save_checkpoint, save_reducer};
use super::config::{Condition, TrainConfig};
use super::eval::{evaluate, DecoderConfig, EvalReport};
use super::experiment::{build_sample, fit_side_standardizer};
use super::features::{downsample_video, EegFrontEnd, EegReducer, FeatureConfig, UtteranceFeatures};
use super::manifest::{entry_path, manifest_base, Manifest, ManifestEntry};
use super::synth::{utterance_plan, Generator, Split, SynthConfig, EEG_SAMPLE_RATE_HZ};
use super::tensorfile::{TensorData, TensorFile};
use super::train::{train, write_loss_csv, EpochStats};
use crate::ctc::Alphabet;
use crate::dsp::{extract_mfcc, AudioRecording, EegRecording, FeatureKind, FeatureSequence, MfccConfig, AUDIO_SAMPLE_RATE_HZ};
use crate::lm::{LanguageModel, NGramModel};
use crate::video::{align_streams, VideoSequence};
use crate::{Error, Result, FRAME_RATE_HZ};

pub const STREAM_EEG: &str = "eeg";
pub const STREAM_AUDIO: &str = "audio";
pub const STREAM_VIDEO: &str = "video";
pub const STREAM_EEG_STAT: &str = "eeg_stat";
pub const STREAM_MFCC: &str = "mfcc";
pub const STREAM_VIDEO_SMALL: &str = "video_small";
pub const STREAM_EEG_KPCA: &str = "eeg_kpca";

fn f32_file(dims: &[usize], values: &[f64]) -> Result<TensorFile> {
    TensorFile::f32(dims, values.iter().map(|&v| v as f32).collect())
}

fn read_features(path: &Path, kind: FeatureKind) -> Result<FeatureSequence> {
    let t = TensorFile::read(path)?;
    let shape = t.shape();
    if shape.len() != 2 {
        return Err(Error::Format(format!("{}: expected a T x D tensor, got {shape:?}", path.display())));
    }
    FeatureSequence::new(t.to_tensor()?.into_data(), shape[0], shape[1], FRAME_RATE_HZ, kind)
}

fn read_video(path: &Path) -> Result<VideoSequence> {
    let t = TensorFile::read(path)?;
    let shape = t.shape();
    match (t.data, shape.as_slice()) {
        (TensorData::U8(bytes), &[n, h, w]) => VideoSequence::new(bytes, n, h, w),
        _ => Err(Error::Format(format!("{}: expected a T x H x W uint8 tensor", path.display()))),
    }
}

/// Render the synthetic corpus to `dir` and write `dir/manifest.json`.
pub fn write_synth_dataset(cfg: &SynthConfig, dir: &Path, progress: &mut dyn FnMut(&str)) -> Result<Manifest> {
    let generator = Generator::new(cfg)?;
    let plan = utterance_plan(cfg);
    let mut manifest = Manifest::default();
    for (i, spec) in plan.iter().enumerate() {
        let u = generator.generate(spec)?;
        let mut files = std::collections::BTreeMap::new();
        let eeg_rel = format!("raw/{}.eeg.mtns", spec.id);
        let flat: Vec<f64> = u.eeg.channels.iter().flatten().copied().collect();
        f32_file(&[u.eeg.channel_count(), u.eeg.len()], &flat)?.write(&dir.join(&eeg_rel))?;
        files.insert(STREAM_EEG.to_string(), eeg_rel);
        let audio_rel = format!("raw/{}.audio.mtns", spec.id);
        f32_file(&[u.audio.samples.len()], &u.audio.samples)?.write(&dir.join(&audio_rel))?;
        files.insert(STREAM_AUDIO.to_string(), audio_rel);
        let video_rel = format!("raw/{}.video.mtns", spec.id);
        TensorFile::u8(&[u.video.len, u.video.height, u.video.width], u.video.frames.clone())?.write(&dir.join(&video_rel))?;
        files.insert(STREAM_VIDEO.to_string(), video_rel);
        manifest.utterances.push(ManifestEntry {
            id: spec.id.clone(),
            text: spec.text.clone(),
            subject: spec.subject,
            split: spec.split,
            files,
        });
        if (i + 1) % 30 == 0 || i + 1 == plan.len() {
            progress(&format!("synth: {}/{}", i + 1, plan.len()));
        }
    }
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Apply `step` to every utterance and record the produced file under `stream`.
fn map_entries(
    manifest_path: &Path,
    stream: &str,
    mut step: impl FnMut(&Path, &ManifestEntry) -> Result<TensorFile>,
) -> Result<Manifest> {
    let mut manifest = Manifest::load(manifest_path)?;
    let base = manifest_base(manifest_path);
    for entry in &mut manifest.utterances {
        let file = step(&base, entry)?;
        let rel = format!("features/{}.{stream}.mtns", entry.id);
        file.write(&base.join(&rel))?;
        entry.files.insert(stream.to_string(), rel);
    }
    manifest.save(manifest_path)?;
    Ok(manifest)
}

pub fn extract_eeg_step(manifest_path: &Path, cfg: &FeatureConfig) -> Result<Manifest> {
    let front = EegFrontEnd::new(cfg, EEG_SAMPLE_RATE_HZ)?;
    map_entries(manifest_path, STREAM_EEG_STAT, |base, e| {
        let t = TensorFile::read(&entry_path(base, e, STREAM_EEG)?)?;
        let shape = t.shape();
        if shape.len() != 2 {
            return Err(Error::Format(format!("{}: EEG must be channels x samples", e.id)));
        }
        let data = t.to_tensor()?.into_data();
        let channels = data.chunks(shape[1].max(1)).take(shape[0]).map(<[f64]>::to_vec).collect();
        let f = front.extract(&EegRecording::new(channels, EEG_SAMPLE_RATE_HZ)?)?;
        f32_file(&[f.frames(), f.dim()], f.as_slice())
    })
}

pub fn extract_mfcc_step(manifest_path: &Path) -> Result<Manifest> {
    map_entries(manifest_path, STREAM_MFCC, |base, e| {
        let t = TensorFile::read(&entry_path(base, e, STREAM_AUDIO)?)?;
        let audio = AudioRecording {
            samples: t.to_tensor()?.into_data(),
            sample_rate_hz: AUDIO_SAMPLE_RATE_HZ,
        };
        let f = extract_mfcc(&audio, &MfccConfig::default())?;
        f32_file(&[f.frames(), f.dim()], f.as_slice())
    })
}

pub fn extract_video_step(manifest_path: &Path, cfg: &FeatureConfig) -> Result<Manifest> {
    map_entries(manifest_path, STREAM_VIDEO_SMALL, |base, e| {
        let v = read_video(&entry_path(base, e, STREAM_VIDEO)?)?;
        if cfg.video_factor == 0 || cfg.video_factor > v.height.min(v.width) {
            return Err(Error::Config(format!("video_factor {} does not fit {}x{} frames", cfg.video_factor, v.height, v.width)));
        }
        let small = downsample_video(&v, cfg.video_factor)?;
        TensorFile::u8(&[small.len, small.height, small.width], small.frames)
    })
}

/// Fit the z-score + kernel PCA reducer on the training split's EEG features.
pub fn kpca_fit_step(manifest_path: &Path, cfg: &FeatureConfig, out_dir: &Path) -> Result<EegReducer> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_base(manifest_path);
    let seqs = manifest
        .split(Split::Train)
        .map(|e| read_features(&entry_path(&base, e, STREAM_EEG_STAT)?, FeatureKind::EegStat))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&FeatureSequence> = seqs.iter().collect();
    let reducer = EegReducer::fit(&refs, cfg)?;
    save_reducer(out_dir, &reducer)?;
    Ok(reducer)
}

pub fn kpca_apply_step(manifest_path: &Path, model_dir: &Path) -> Result<Manifest> {
    let reducer = load_reducer(model_dir)?;
    map_entries(manifest_path, STREAM_EEG_KPCA, |base, e| {
        let f = reducer.reduce(&read_features(&entry_path(base, e, STREAM_EEG_STAT)?, FeatureKind::EegStat)?)?;
        f32_file(&[f.frames(), f.dim()], f.as_slice())
    })
}

/// Streams a condition needs from the manifest.
pub fn required_streams(condition: Condition) -> Vec<&'static str> {
    let mut s = Vec::new();
    if condition.uses_video() {
        s.push(STREAM_VIDEO_SMALL);
    }
    if condition.uses_eeg() {
        s.push(STREAM_EEG_KPCA);
    }
    if condition.uses_mfcc() {
        s.push(STREAM_MFCC);
    }
    s
}

/// Load and align the streams of one entry. Streams the condition does not
/// use are left as empty placeholders.
pub fn load_features(base: &Path, e: &ManifestEntry, condition: Condition) -> Result<UtteranceFeatures> {
    let placeholder = || FeatureSequence::new(Vec::new(), 0, 1, FRAME_RATE_HZ, FeatureKind::Concatenated);
    let video = if condition.uses_video() {
        read_video(&entry_path(base, e, STREAM_VIDEO_SMALL)?)?
    } else {
        VideoSequence::new(Vec::new(), 0, 1, 1)?
    };
    let eeg = if condition.uses_eeg() {
        read_features(&entry_path(base, e, STREAM_EEG_KPCA)?, FeatureKind::KpcaReduced)?
    } else {
        placeholder()?
    };
    let mfcc = if condition.uses_mfcc() {
        read_features(&entry_path(base, e, STREAM_MFCC)?, FeatureKind::Mfcc)?
    } else {
        placeholder()?
    };
    let used: Vec<&FeatureSequence> = [(condition.uses_eeg(), &eeg), (condition.uses_mfcc(), &mfcc)]
        .into_iter()
        .filter_map(|(on, f)| on.then_some(f))
        .collect();
    let t = if condition.uses_video() {
        align_streams(&video, &used)?.0.len
    } else {
        let n = used.iter().map(|f| f.frames()).min().unwrap_or(0);
        if n == 0 {
            return Err(Error::Data(format!("utterance {} has an empty feature stream", e.id)));
        }
        n
    };
    let trunc = |f: FeatureSequence, on: bool| if on { f.truncated(t) } else { f };
    Ok(UtteranceFeatures {
        id: e.id.clone(),
        text: e.text.clone(),
        subject: e.subject,
        split: e.split,
        video: if condition.uses_video() { video.truncated(t) } else { video },
        eeg: trunc(eeg, condition.uses_eeg()),
        mfcc: trunc(mfcc, condition.uses_mfcc()),
    })
}

fn load_split(manifest_path: &Path, split: Split, condition: Condition) -> Result<Vec<UtteranceFeatures>> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_base(manifest_path);
    manifest.validate(&base, &required_streams(condition))?;
    manifest.split(split).map(|e| load_features(&base, e, condition)).collect()
}

/// Train on the manifest's training split; writes `checkpoint/` and `loss.csv` under `out_dir`.
pub fn run_training(
    manifest_path: &Path,
    condition: Condition,
    cfg: &TrainConfig,
    out_dir: &Path,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    let utts = load_split(manifest_path, Split::Train, condition)?;
    let refs: Vec<&UtteranceFeatures> = utts.iter().collect();
    let z = fit_side_standardizer(&refs, condition)?;
    let samples = utts.iter().map(|u| build_sample(u, condition, z.as_ref())).collect::<Result<Vec<_>>>()?;
    let first = utts.first().ok_or_else(|| Error::Data("manifest has no training utterances".into()))?;
    let model_cfg = cfg.model_config(
        condition,
        (first.video.height, first.video.width),
        z.as_ref().map_or(0, |s| s.dim()),
        Alphabet::default().size(),
    );
    let (model, history) = train(&samples, model_cfg, cfg, on_epoch)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    save_checkpoint(&out_dir.join("checkpoint"), &model, condition, z.as_ref())?;
    write_loss_csv(&out_dir.join("loss.csv"), &history)?;
    Ok(history)
}

/// Decode `split` with a checkpoint and write the JSON report to `report_path`.
pub fn run_eval(
    manifest_path: &Path,
    checkpoint_dir: &Path,
    split: Split,
    decoder: &DecoderConfig,
    lm_path: Option<&Path>,
    report_path: &Path,
) -> Result<EvalReport> {
    let (model, header) = load_checkpoint(checkpoint_dir)?;
    let utts = load_split(manifest_path, split, header.condition)?;
    let samples = utts
        .iter()
        .map(|u| build_sample(u, header.condition, header.side_standardizer.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let lm = lm_path.map(NGramModel::load).transpose()?;
    let name = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let report = evaluate(&model, &samples, header.condition, name, decoder, lm.as_ref().map(|m| m as &dyn LanguageModel))?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    if let Some(dir) = report_path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(report_path, text).map_err(|e| Error::io(report_path, e))?;
    Ok(report)
}
