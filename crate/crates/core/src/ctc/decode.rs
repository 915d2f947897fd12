//! Greedy best-path decoding and prefix beam search with shallow fusion.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{log_add, BLANK};
use crate::lm::LanguageModel;
use crate::nn::Tensor;
use crate::{Error, Result};

/// Arg-max per frame (lowest index on ties), merge repeats, drop blanks.
pub fn greedy_decode(probs: &Tensor) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for t in 0..probs.rows() {
        let row = probs.row(t);
        let best = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > row[best] { i } else { best });
        if Some(best) != prev && best != BLANK {
            out.push(best);
        }
        prev = Some(best);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Weight of the language-model log-probability.
    pub alpha: f64,
    /// Bonus per emitted character.
    pub beta: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 16,
            alpha: 0.5,
            beta: 0.6,
        }
    }
}

/// A prefix in the beam with its blank / non-blank ending log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub prefix: Vec<usize>,
    pub p_blank: f64,
    pub p_nonblank: f64,
    /// Sum of language-model log-probabilities of the prefix characters.
    pub lm_score: f64,
    pub score: f64,
}

impl BeamHypothesis {
    pub fn p_total(&self) -> f64 {
        log_add(self.p_blank, self.p_nonblank)
    }
}

#[derive(Debug, Clone)]
pub struct BeamResult {
    pub best: BeamHypothesis,
    /// Surviving beam after the last frame, best first.
    pub beam: Vec<BeamHypothesis>,
}

struct Entry {
    p_blank: f64,
    p_nonblank: f64,
    lm_score: f64,
}

fn by_score(a: &BeamHypothesis, b: &BeamHypothesis) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.prefix.cmp(&b.prefix))
}

/// Prefix beam search over `T x C` probabilities. With `lm = None` or
/// `alpha = 0` only the CTC and length terms score hypotheses.
pub fn beam_search(probs: &Tensor, cfg: &BeamConfig, lm: Option<&dyn LanguageModel>) -> Result<BeamResult> {
    if cfg.beam_width == 0 {
        return Err(Error::Parameter("beam width must be at least 1".into()));
    }
    if !(cfg.alpha >= 0.0 && cfg.beta >= 0.0) {
        return Err(Error::Parameter("fusion weights must be non-negative".into()));
    }
    let classes = probs.row_len();
    let lm = lm.filter(|_| cfg.alpha > 0.0);
    let rescore = |prefix: Vec<usize>, e: &Entry| {
        let p = log_add(e.p_blank, e.p_nonblank);
        BeamHypothesis {
            score: p + cfg.alpha * e.lm_score + cfg.beta * prefix.len() as f64,
            prefix,
            p_blank: e.p_blank,
            p_nonblank: e.p_nonblank,
            lm_score: e.lm_score,
        }
    };

    let mut beam = vec![BeamHypothesis {
        prefix: Vec::new(),
        p_blank: 0.0,
        p_nonblank: f64::NEG_INFINITY,
        lm_score: 0.0,
        score: 0.0,
    }];
    for t in 0..probs.rows() {
        let lp: Vec<f64> = probs.row(t).iter().map(|p| p.ln()).collect();
        let mut next: HashMap<Vec<usize>, Entry> = HashMap::new();
        for hyp in &beam {
            let total = hyp.p_total();
            let e = next.entry(hyp.prefix.clone()).or_insert(Entry {
                p_blank: f64::NEG_INFINITY,
                p_nonblank: f64::NEG_INFINITY,
                lm_score: hyp.lm_score,
            });
            e.p_blank = log_add(e.p_blank, total + lp[BLANK]);
            let last = hyp.prefix.last().copied();
            if let Some(c) = last {
                e.p_nonblank = log_add(e.p_nonblank, hyp.p_nonblank + lp[c]);
            }
            for (c, &p) in lp.iter().enumerate().take(classes).skip(1) {
                if p == f64::NEG_INFINITY {
                    continue;
                }
                let from = if last == Some(c) { hyp.p_blank } else { total };
                let mut extended = hyp.prefix.clone();
                extended.push(c);
                let e = next.entry(extended).or_insert_with(|| Entry {
                    p_blank: f64::NEG_INFINITY,
                    p_nonblank: f64::NEG_INFINITY,
                    lm_score: hyp.lm_score + lm.map_or(0.0, |m| m.log_prob(c, &hyp.prefix)),
                });
                e.p_nonblank = log_add(e.p_nonblank, from + p);
            }
        }
        let mut candidates: Vec<BeamHypothesis> = next.into_iter().map(|(k, e)| rescore(k, &e)).collect();
        candidates.sort_by(by_score);
        candidates.truncate(cfg.beam_width);
        beam = candidates;
    }
    Ok(BeamResult {
        best: beam[0].clone(),
        beam,
    })
}

/// Best labelling from [`beam_search`]; empty input decodes to nothing.
pub fn beam_search_decode(probs: &Tensor, cfg: &BeamConfig, lm: Option<&dyn LanguageModel>) -> Result<Vec<usize>> {
    if probs.rows() == 0 {
        return Ok(Vec::new());
    }
    Ok(beam_search(probs, cfg, lm)?.best.prefix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(rows: &[&[f64]]) -> Tensor {
        Tensor::from_vec(&[rows.len(), rows[0].len()], rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn greedy_collapse_rules() {
        // argmax path: blank a a blank b
        let p = probs(&[
            &[0.9, 0.05, 0.05],
            &[0.1, 0.8, 0.1],
            &[0.1, 0.8, 0.1],
            &[0.7, 0.2, 0.1],
            &[0.1, 0.1, 0.8],
        ]);
        assert_eq!(greedy_decode(&p), vec![1, 2]);
        assert!(greedy_decode(&probs(&[&[0.9, 0.1], &[0.6, 0.4]])).is_empty());
        let sep = probs(&[&[0.1, 0.9], &[0.9, 0.1], &[0.1, 0.9]]);
        assert_eq!(greedy_decode(&sep), vec![1, 1]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(greedy_decode(&probs(&[&[0.2, 0.4, 0.4]])), vec![1]);
    }

    #[test]
    fn empty_input() {
        let p = Tensor::zeros(&[0, 3]);
        assert!(beam_search_decode(&p, &BeamConfig::default(), None).unwrap().is_empty());
    }

    #[test]
    fn invalid_config() {
        let p = probs(&[&[0.5, 0.5]]);
        let cfg = BeamConfig {
            beam_width: 0,
            ..BeamConfig::default()
        };
        assert!(matches!(beam_search(&p, &cfg, None), Err(Error::Parameter(_))));
        let cfg = BeamConfig {
            alpha: -1.0,
            ..BeamConfig::default()
        };
        assert!(matches!(beam_search(&p, &cfg, None), Err(Error::Parameter(_))));
    }

    #[test]
    fn beam_accumulates_over_alignments() {
        // best path is blank-blank, but "a" collects more total mass
        let p = probs(&[&[0.6, 0.4], &[0.6, 0.4]]);
        let cfg = BeamConfig {
            beam_width: 4,
            alpha: 0.0,
            beta: 0.0,
        };
        assert!(greedy_decode(&p).is_empty());
        // P("") = 0.36, P("a") = 0.4*0.4 + 0.4*0.6 + 0.6*0.4 = 0.64
        assert_eq!(beam_search_decode(&p, &cfg, None).unwrap(), vec![1]);
    }
}
