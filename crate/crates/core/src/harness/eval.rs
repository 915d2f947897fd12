//! Decoding and word-error-rate reports.

use serde::{Deserialize, Serialize};

use super::config::Condition;
use super::train::Sample;
use super::wer::wer;
use crate::ctc::{beam_search_decode, greedy_decode, Alphabet, BeamConfig};
use crate::lm::LanguageModel;
use crate::nn::{ModelGraph, Pass, Tensor};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    /// Best-path decoding instead of beam search.
    pub greedy: bool,
    pub beam_width: usize,
    pub lm_alpha: f64,
    pub len_beta: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        let b = BeamConfig::default();
        Self {
            greedy: false,
            beam_width: b.beam_width,
            lm_alpha: b.alpha,
            len_beta: b.beta,
        }
    }
}

impl DecoderConfig {
    pub fn beam(&self) -> BeamConfig {
        BeamConfig {
            beam_width: self.beam_width,
            alpha: self.lm_alpha,
            beta: self.len_beta,
        }
    }
}

pub fn decode_probs(probs: &Tensor, cfg: &DecoderConfig, lm: Option<&dyn LanguageModel>) -> Result<String> {
    let labels = if cfg.greedy {
        greedy_decode(probs)
    } else {
        beam_search_decode(probs, &cfg.beam(), lm)?
    };
    Ok(Alphabet::default().decode(&labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceResult {
    pub id: String,
    pub subject: usize,
    pub reference: String,
    pub hypothesis: String,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: Condition,
    pub split: String,
    pub decoder: DecoderConfig,
    pub language_model: bool,
    pub utterances: Vec<UtteranceResult>,
    pub mean_wer: f64,
}

pub fn evaluate(
    model: &ModelGraph,
    samples: &[Sample],
    condition: Condition,
    split: &str,
    cfg: &DecoderConfig,
    lm: Option<&dyn LanguageModel>,
) -> Result<EvalReport> {
    let mut utterances = Vec::with_capacity(samples.len());
    for s in samples {
        let (probs, _) = model.forward(s.video.as_ref(), s.side.as_ref(), Pass::Inference)?;
        let hypothesis = decode_probs(&probs, cfg, lm)?;
        utterances.push(UtteranceResult {
            id: s.id.clone(),
            subject: s.subject,
            wer: wer(&s.text, &hypothesis),
            reference: s.text.clone(),
            hypothesis,
        });
    }
    let mean_wer = if utterances.is_empty() {
        0.0
    } else {
        utterances.iter().map(|u| u.wer).sum::<f64>() / utterances.len() as f64
    };
    Ok(EvalReport {
        condition,
        split: split.to_string(),
        decoder: cfg.clone(),
        language_model: lm.is_some() && !cfg.greedy,
        utterances,
        mean_wer,
    })
}
