//! `eegvsr` command-line driver.
//!
//! Every subcommand prints a single JSON document on success. Failures exit
//! with status 1 and print `{"error":{"kind":...,"message":...}}` on one line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eegvsr::harness::disk::{
    extract_eeg_step, extract_mfcc_step, extract_video_step, kpca_apply_step, kpca_fit_step, load_features,
    run_eval, run_training, write_synth_dataset,
};
use eegvsr::harness::{
    build_sample, decode_probs, load_checkpoint, manifest_base, model_gradcheck, run_experiment, Condition,
    ExperimentConfig, Manifest, Split,
};
use eegvsr::lm::{train_lm, LanguageModel, NGramModel};
use eegvsr::nn::{ModelMode, Pass};
use eegvsr::{ctc::Alphabet, Error, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "eegvsr", version, about = "Multimodal EEG/audio/video speech recognition pipeline")]
struct Cli {
    /// JSON experiment configuration; missing fields take desk defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the synthesis and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ManifestArg {
    /// Manifest written by `synth-data`.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct DecoderArgs {
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    lm_alpha: Option<f64>,
    #[arg(long)]
    len_beta: Option<f64>,
    /// Character n-gram model written by `train-lm`.
    #[arg(long)]
    lm_path: Option<PathBuf>,
    /// Best-path decoding instead of beam search.
    #[arg(long)]
    greedy: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
    Overfit,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic corpus and its manifest into the output directory.
    SynthData {
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Band-pass, notch and statistical features for every EEG recording.
    ExtractEeg(ManifestArg),
    /// 13 MFCCs per 10 ms frame for every audio recording.
    ExtractMfcc(ManifestArg),
    /// Area-downsample the video frames for the CNN.
    ExtractVideo(ManifestArg),
    /// Fit the EEG kernel PCA on the training split.
    KpcaFit(ManifestArg),
    /// Project every utterance's EEG features with a fitted kernel PCA.
    KpcaApply {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train the character language model on the training transcripts.
    TrainLm(ManifestArg),
    /// Train a recogniser for one feature condition.
    Train {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long)]
        condition: Condition,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Decode a split and write a WER report.
    Evaluate {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Decode one utterance.
    Decode {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        id: String,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Finite-difference check of the network gradients on tiny models.
    Gradcheck {
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
    /// In-memory corpus, features, training and evaluation for each condition.
    Experiment {
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => base,
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    Ok(cfg)
}

fn apply_decoder(cfg: &mut ExperimentConfig, d: &DecoderArgs) {
    if let Some(v) = d.beam_width {
        cfg.decoder.beam_width = v;
    }
    if let Some(v) = d.lm_alpha {
        cfg.decoder.lm_alpha = v;
    }
    if let Some(v) = d.len_beta {
        cfg.decoder.len_beta = v;
    }
    cfg.decoder.greedy |= d.greedy;
}

fn progress(msg: &str) {
    eprintln!("{msg}");
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<Value> {
    let preset = match cli.command {
        Command::Experiment { preset: Preset::Full } => ExperimentConfig::full(),
        Command::Experiment { preset: Preset::Overfit } => ExperimentConfig::overfit(),
        _ => ExperimentConfig::desk(),
    };
    let mut cfg = load_config(cli.config.as_deref(), cli.seed, preset)?;
    let out = cli.out_dir;
    match cli.command {
        Command::SynthData { sentences, reps, subjects } => {
            if let Some(v) = sentences {
                cfg.synth.n_sentences = v;
            }
            if let Some(v) = reps {
                cfg.synth.n_reps = v;
            }
            if let Some(v) = subjects {
                cfg.synth.n_subjects = v;
                cfg.synth.test_subjects = cfg.synth.test_subjects.min(v);
            }
            let m = write_synth_dataset(&cfg.synth, &out, &mut progress)?;
            Ok(json!({"manifest": out.join("manifest.json"), "utterances": m.utterances.len()}))
        }
        Command::ExtractEeg(a) => {
            let m = extract_eeg_step(&a.manifest, &cfg.features)?;
            Ok(json!({"manifest": a.manifest, "stream": "eeg_stat", "utterances": m.utterances.len()}))
        }
        Command::ExtractMfcc(a) => {
            let m = extract_mfcc_step(&a.manifest)?;
            Ok(json!({"manifest": a.manifest, "stream": "mfcc", "utterances": m.utterances.len()}))
        }
        Command::ExtractVideo(a) => {
            let m = extract_video_step(&a.manifest, &cfg.features)?;
            Ok(json!({"manifest": a.manifest, "stream": "video_small", "utterances": m.utterances.len()}))
        }
        Command::KpcaFit(a) => {
            let dir = out.join("kpca");
            let r = kpca_fit_step(&a.manifest, &cfg.features, &dir)?;
            Ok(json!({
                "model": dir,
                "components": r.kpca.n_components,
                "training_frames": r.kpca.n_train,
                "explained_variance": r.kpca.explained_variance(),
            }))
        }
        Command::KpcaApply { manifest, model } => {
            let m = kpca_apply_step(&manifest.manifest, &model)?;
            Ok(json!({"manifest": manifest.manifest, "stream": "eeg_kpca", "utterances": m.utterances.len()}))
        }
        Command::TrainLm(a) => {
            let m = Manifest::load(&a.manifest)?;
            let texts: Vec<&str> = m.split(Split::Train).map(|u| u.text.as_str()).collect();
            let lm = train_lm(&texts, &Alphabet::default(), cfg.lm.config())?;
            let path = out.join("lm.json");
            fs::create_dir_all(&out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
            lm.save(&path)?;
            let test: Vec<&str> = m.split(Split::Test).map(|u| u.text.as_str()).collect();
            let ppl = if test.is_empty() { None } else { Some(lm.perplexity(&test, &Alphabet::default())?) };
            Ok(json!({"lm": path, "order": lm.order, "test_perplexity": ppl}))
        }
        Command::Train { manifest, condition, epochs } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let history = run_training(&manifest.manifest, condition, &cfg.train, &out, |s| {
                progress(&format!("epoch {} train {:.4} val {:?}", s.epoch, s.train_loss, s.val_loss))
            })?;
            Ok(json!({
                "checkpoint": out.join("checkpoint"),
                "loss_curve": out.join("loss.csv"),
                "condition": condition,
                "final_train_loss": history.last().map(|h| h.train_loss),
            }))
        }
        Command::Evaluate { manifest, checkpoint, split, decoder } => {
            apply_decoder(&mut cfg, &decoder);
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let path = out.join("report.json");
            let r = run_eval(&manifest.manifest, &checkpoint, split, &cfg.decoder, decoder.lm_path.as_deref(), &path)?;
            Ok(json!({"report": path, "condition": r.condition, "utterances": r.utterances.len(), "mean_wer": r.mean_wer}))
        }
        Command::Decode { manifest, checkpoint, id, decoder } => {
            apply_decoder(&mut cfg, &decoder);
            let (model, header) = load_checkpoint(&checkpoint)?;
            let m = Manifest::load(&manifest.manifest)?;
            let entry = m
                .utterances
                .iter()
                .find(|u| u.id == id)
                .ok_or_else(|| Error::Data(format!("utterance {id} is not in the manifest")))?;
            let feats = load_features(&manifest_base(&manifest.manifest), entry, header.condition)?;
            let sample = build_sample(&feats, header.condition, header.side_standardizer.as_ref())?;
            let lm = decoder.lm_path.as_deref().map(NGramModel::load).transpose()?;
            let (probs, _) = model.forward(sample.video.as_ref(), sample.side.as_ref(), Pass::Inference)?;
            let hyp = decode_probs(&probs, &cfg.decoder, lm.as_ref().map(|m| m as &dyn LanguageModel))?;
            Ok(json!({"id": id, "reference": entry.text, "hypothesis": hyp, "wer": eegvsr::harness::wer(&entry.text, &hyp)}))
        }
        Command::Gradcheck { seeds } => {
            let mut reports = Vec::new();
            for seed in 0..seeds {
                for mode in [ModelMode::Fusion, ModelMode::VideoOnly, ModelMode::SideOnly] {
                    reports.push(model_gradcheck(mode, seed, 1e-4)?);
                }
            }
            let worst = reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
            Ok(json!({"max_relative_error": worst, "passed": worst <= 1e-3, "runs": reports}))
        }
        Command::Experiment { .. } => {
            let report = run_experiment(&cfg, &mut progress)?;
            let path = out.join("experiment.json");
            write_json(&path, &serde_json::to_value(&report)?)?;
            let wers: serde_json::Map<String, Value> =
                report.conditions.iter().map(|c| (c.condition.name().to_string(), json!(c.eval.mean_wer))).collect();
            Ok(json!({"report": path, "seed": report.seed, "mean_wer": wers}))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::FAILURE
        }
    }
}
