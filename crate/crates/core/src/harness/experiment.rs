//! In-memory modality comparison: synthesise the corpus, extract features,
//! fit the EEG reducer and language model on the training subjects, then
//! train and score one model per feature condition.

use serde::{Deserialize, Serialize};

use super::config::{Condition, TrainConfig};
use super::eval::{evaluate, DecoderConfig, EvalReport};
use super::features::{
    extract_utterance, reduce_eeg, video_tensor, EegFrontEnd, EegReducer, FeatureConfig, Standardizer, UtteranceFeatures,
};
use super::synth::{utterance_plan, Generator, Split, SynthConfig, EEG_SAMPLE_RATE_HZ};
use super::train::{train, EpochStats, Sample};
use crate::ctc::Alphabet;
use crate::dsp::FeatureSequence;
use crate::lm::{train_lm, LanguageModel, LmConfig, NGramModel};
use crate::nn::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub enabled: bool,
    pub order: usize,
    pub k: f64,
    pub backoff: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        let d = LmConfig::default();
        Self {
            enabled: true,
            order: d.order,
            k: d.k,
            backoff: d.backoff,
        }
    }
}

impl LmSettings {
    pub fn config(&self) -> LmConfig {
        LmConfig {
            order: self.order,
            k: self.k,
            backoff: self.backoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub decoder: DecoderConfig,
    pub lm: LmSettings,
    pub conditions: Vec<Condition>,
    /// Also decode the training utterances after training.
    pub evaluate_train: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Full-size network, full frames, 120 epochs with batches of 100.
    pub fn full() -> Self {
        Self {
            synth: SynthConfig::default(),
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            decoder: DecoderConfig::default(),
            lm: LmSettings::default(),
            conditions: Condition::ALL.to_vec(),
            evaluate_train: false,
        }
    }

    /// Single-core budget: 10x10 frames, eight conv filters, small batches, few epochs.
    pub fn desk() -> Self {
        let mut c = Self::full();
        c.features.video_factor = 10;
        c.train.epochs = 12;
        c.train.batch_size = 8;
        c.train.lr = 3e-3;
        c.train.clip_norm = 5.0;
        c.train.conv_filters = 8;
        c.conditions = vec![Condition::Video, Condition::VideoEeg, Condition::VideoEegMfcc];
        c
    }

    /// Five sentences from one subject, trained and scored on themselves.
    pub fn overfit() -> Self {
        let mut c = Self::desk();
        c.synth.n_sentences = 5;
        c.synth.n_reps = 1;
        c.synth.n_subjects = 1;
        c.synth.test_subjects = 0;
        c.train.epochs = 200;
        c.train.batch_size = 1;
        c.train.val_split = 0.0;
        c.train.lr = 1e-3;
        c.conditions = vec![Condition::VideoEegMfcc];
        c.evaluate_train = true;
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.train.seed = seed;
        self
    }
}

/// Extracted, aligned and reduced features of the whole corpus.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub utterances: Vec<UtteranceFeatures>,
    pub reducer: EegReducer,
    pub lm: Option<NGramModel>,
}

impl PreparedCorpus {
    pub fn split(&self, split: Split) -> Vec<&UtteranceFeatures> {
        self.utterances.iter().filter(|u| u.split == split).collect()
    }
}

pub fn prepare(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<PreparedCorpus> {
    let generator = Generator::new(&cfg.synth)?;
    let front = EegFrontEnd::new(&cfg.features, EEG_SAMPLE_RATE_HZ)?;
    let plan = utterance_plan(&cfg.synth);
    let mut utterances = Vec::with_capacity(plan.len());
    for (i, spec) in plan.iter().enumerate() {
        let u = generator.generate(spec)?;
        utterances.push(extract_utterance(&u, &front, &cfg.features)?);
        if (i + 1) % 90 == 0 || i + 1 == plan.len() {
            progress(&format!("features: {}/{} utterances", i + 1, plan.len()));
        }
    }
    let train_eeg: Vec<&FeatureSequence> = utterances.iter().filter(|u| u.split == Split::Train).map(|u| &u.eeg).collect();
    let reducer = EegReducer::fit(&train_eeg, &cfg.features)?;
    progress(&format!("kpca: {} components from {} frames", reducer.kpca.n_components, reducer.kpca.n_train));
    reduce_eeg(&mut utterances, &reducer)?;
    let lm = if cfg.lm.enabled {
        let texts: Vec<&str> = utterances.iter().filter(|u| u.split == Split::Train).map(|u| u.text.as_str()).collect();
        Some(train_lm(&texts, &Alphabet::default(), cfg.lm.config())?)
    } else {
        None
    };
    Ok(PreparedCorpus { utterances, reducer, lm })
}

/// Side-branch input for `condition`: reduced EEG and/or MFCC, concatenated.
pub fn side_features(u: &UtteranceFeatures, condition: Condition) -> Result<Option<FeatureSequence>> {
    let mut parts = Vec::new();
    if condition.uses_eeg() {
        parts.push(&u.eeg);
    }
    if condition.uses_mfcc() {
        parts.push(&u.mfcc);
    }
    match parts.len() {
        0 => Ok(None),
        1 => Ok(Some(parts[0].clone())),
        _ => FeatureSequence::concat(&parts).map(Some),
    }
}

pub fn fit_side_standardizer(train: &[&UtteranceFeatures], condition: Condition) -> Result<Option<Standardizer>> {
    let sides: Vec<FeatureSequence> = train
        .iter()
        .map(|u| side_features(u, condition))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    match sides.first() {
        None => Ok(None),
        Some(first) => Standardizer::fit(sides.iter().flat_map(|s| s.rows()), first.dim()).map(Some),
    }
}

pub fn build_sample(u: &UtteranceFeatures, condition: Condition, standardizer: Option<&Standardizer>) -> Result<Sample> {
    let side = match (side_features(u, condition)?, standardizer) {
        (Some(s), Some(z)) => Some(z.apply(&s)?),
        (s, _) => s,
    };
    Ok(Sample {
        id: u.id.clone(),
        subject: u.subject,
        text: u.text.clone(),
        labels: Alphabet::default().encode(&u.text)?,
        video: if condition.uses_video() { Some(video_tensor(&u.video)?) } else { None },
        side: side.map(|s| Tensor::from_vec(&[s.frames(), s.dim()], s.into_data())).transpose()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub parameter_count: usize,
    pub history: Vec<EpochStats>,
    pub eval: EvalReport,
    pub train_eval: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub kpca_components: usize,
    /// Cumulative explained variance of the leading kernel components.
    pub kpca_explained_variance: Vec<f64>,
    pub lm_perplexity: Option<f64>,
    pub conditions: Vec<ConditionReport>,
}

impl ExperimentReport {
    pub fn mean_wer(&self, condition: Condition) -> Option<f64> {
        self.conditions.iter().find(|c| c.condition == condition).map(|c| c.eval.mean_wer)
    }
}

pub fn run_condition(
    corpus: &PreparedCorpus,
    condition: Condition,
    cfg: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<ConditionReport> {
    let train_utts = corpus.split(Split::Train);
    let test_utts = corpus.split(Split::Test);
    let z = fit_side_standardizer(&train_utts, condition)?;
    let build = |us: &[&UtteranceFeatures]| us.iter().map(|u| build_sample(u, condition, z.as_ref())).collect::<Result<Vec<_>>>();
    let train_samples = build(&train_utts)?;
    let test_samples = build(&test_utts)?;
    let first = train_utts.first().ok_or_else(|| Error::Data("no training utterances".into()))?;
    let model_cfg = cfg.train.model_config(
        condition,
        (first.video.height, first.video.width),
        z.as_ref().map_or(0, Standardizer::dim),
        Alphabet::default().size(),
    );
    let (model, history) = train(&train_samples, model_cfg, &cfg.train, |s| {
        progress(&format!(
            "{condition}: epoch {} train {:.3} val {}",
            s.epoch,
            s.train_loss,
            s.val_loss.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
        ))
    })?;
    let lm = corpus.lm.as_ref().map(|m| m as &dyn LanguageModel);
    let eval = if test_samples.is_empty() {
        evaluate(&model, &train_samples, condition, "train", &cfg.decoder, lm)?
    } else {
        evaluate(&model, &test_samples, condition, "test", &cfg.decoder, lm)?
    };
    progress(&format!("{condition}: mean WER {:.2} on {}", eval.mean_wer, eval.split));
    let train_eval = if cfg.evaluate_train {
        Some(evaluate(&model, &train_samples, condition, "train", &cfg.decoder, lm)?)
    } else {
        None
    };
    Ok(ConditionReport {
        condition,
        parameter_count: model.parameter_count(),
        history,
        eval,
        train_eval,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<ExperimentReport> {
    if cfg.conditions.is_empty() {
        return Err(Error::Config("no conditions to run".into()));
    }
    let corpus = prepare(cfg, progress)?;
    let test_texts: Vec<&str> = corpus.split(Split::Test).iter().map(|u| u.text.as_str()).collect();
    let lm_perplexity = match (&corpus.lm, test_texts.is_empty()) {
        (Some(m), false) => Some(m.perplexity(&test_texts, &Alphabet::default())?),
        _ => None,
    };
    let mut conditions = Vec::with_capacity(cfg.conditions.len());
    for &c in &cfg.conditions {
        conditions.push(run_condition(&corpus, c, cfg, progress)?);
    }
    let ev = corpus.reducer.kpca.explained_variance();
    Ok(ExperimentReport {
        seed: cfg.synth.seed,
        train_utterances: corpus.split(Split::Train).len(),
        test_utterances: test_texts.len(),
        kpca_components: corpus.reducer.kpca.n_components,
        kpca_explained_variance: ev[..corpus.reducer.kpca.n_components.min(ev.len())].to_vec(),
        lm_perplexity,
        conditions,
    })
}
