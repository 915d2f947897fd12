//! Character n-gram language model with add-k smoothing and stupid backoff.
//!
//! The vocabulary is the CTC alphabet without the blank. Sentences are
//! left-padded with `order - 1` start markers; no end marker is modelled
//! because the decoder never asks for one.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ctc::{Alphabet, BLANK};
use crate::{Error, Result};

/// Context padding symbol; never part of the vocabulary.
pub const BOS: char = '^';

/// Log-probability of a CTC class given the classes emitted so far.
pub trait LanguageModel {
    /// `class` and `history` use CTC indices (blank excluded).
    fn log_prob(&self, class: usize, history: &[usize]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramModel {
    pub order: usize,
    pub k: f64,
    pub backoff: f64,
    /// Vocabulary in CTC class order (class `i + 1` is `vocab[i]`).
    pub vocab: Vec<char>,
    /// `counts[n][context]` holds next-symbol counts for contexts of length `n`.
    pub counts: Vec<BTreeMap<String, Vec<u64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
    pub backoff: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            order: 4,
            k: 0.1,
            backoff: 0.4,
        }
    }
}

pub fn train_lm(corpus: &[&str], alphabet: &Alphabet, cfg: LmConfig) -> Result<NGramModel> {
    if corpus.is_empty() {
        return Err(Error::Data("language model corpus is empty".into()));
    }
    if cfg.order == 0 || !(cfg.k > 0.0) || !(cfg.backoff > 0.0 && cfg.backoff <= 1.0) {
        return Err(Error::Parameter(format!("invalid language model settings {cfg:?}")));
    }
    let vocab: Vec<char> = (0..alphabet.size()).filter(|&i| i != BLANK).filter_map(|i| alphabet.symbol(i)).collect();
    let v = vocab.len();
    let mut counts = vec![BTreeMap::<String, Vec<u64>>::new(); cfg.order];
    for text in corpus {
        let classes = alphabet.encode(text)?;
        let mut padded: Vec<char> = vec![BOS; cfg.order - 1];
        for &c in &classes {
            let next = c - 1;
            let pos = padded.len();
            for (n, table) in counts.iter_mut().enumerate() {
                let ctx: String = padded[pos - n..pos].iter().collect();
                table.entry(ctx).or_insert_with(|| vec![0; v])[next] += 1;
            }
            padded.push(vocab[next]);
        }
    }
    Ok(NGramModel {
        order: cfg.order,
        k: cfg.k,
        backoff: cfg.backoff,
        vocab,
        counts,
    })
}

impl NGramModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Natural-log probability of vocabulary index `next` after `history`
    /// (vocabulary indices, oldest first). Only the last `order - 1` are used.
    pub fn score(&self, next: usize, history: &[usize]) -> f64 {
        let n = self.order - 1;
        let mut ctx: Vec<char> = vec![BOS; n.saturating_sub(history.len())];
        ctx.extend(history[history.len().saturating_sub(n)..].iter().map(|&i| self.vocab[i]));
        let v = self.vocab_size() as f64;
        let mut penalty = 0.0;
        for len in (0..=n).rev() {
            let key: String = ctx[n - len..].iter().collect();
            if let Some(row) = self.counts[len].get(&key) {
                let total: u64 = row.iter().sum();
                let p = (row[next] as f64 + self.k) / (total as f64 + self.k * v);
                return penalty + p.ln();
            }
            penalty += self.backoff.ln();
        }
        // empty context is always present after training; uniform as a last resort
        penalty - v.ln()
    }

    /// Per-character perplexity over `texts`.
    pub fn perplexity(&self, texts: &[&str], alphabet: &Alphabet) -> Result<f64> {
        let mut nll = 0.0;
        let mut count = 0usize;
        for text in texts {
            let classes = alphabet.encode(text)?;
            for (i, &c) in classes.iter().enumerate() {
                nll -= self.log_prob(c, &classes[..i]);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Data("no characters to score".into()));
        }
        Ok((nll / count as f64).exp())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_slice(&bytes)?;
        if m.order == 0 || m.counts.len() != m.order || m.counts.iter().flat_map(|t| t.values()).any(|r| r.len() != m.vocab.len()) {
            return Err(Error::Format(format!("{} is not a consistent n-gram model", path.display())));
        }
        Ok(m)
    }
}

impl LanguageModel for NGramModel {
    fn log_prob(&self, class: usize, history: &[usize]) -> f64 {
        let hist: Vec<usize> = history.iter().map(|&c| c - 1).collect();
        self.score(class - 1, &hist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(corpus: &[&str], k: f64) -> NGramModel {
        train_lm(corpus, &Alphabet::default(), LmConfig { k, ..LmConfig::default() }).unwrap()
    }

    #[test]
    fn add_k_by_hand() {
        let m = lm(&["ab"], 0.1);
        let a = Alphabet::default();
        let (ia, ib) = (a.index_of('a').unwrap(), a.index_of('b').unwrap());
        let p = m.log_prob(ib, &[ia]).exp();
        assert!((p - 1.1 / (1.0 + 2.8)).abs() < 1e-12);
    }

    #[test]
    fn observed_contexts_normalise() {
        let m = lm(&["the cat sat", "a dog's day"], 0.1);
        for table in &m.counts {
            for ctx in table.keys() {
                let hist: Vec<usize> = ctx.chars().filter(|&c| c != BOS).map(|c| m.vocab.iter().position(|&v| v == c).unwrap()).collect();
                let pad = ctx.chars().filter(|&c| c == BOS).count();
                // contexts shorter than order-1 without padding are reached only via backoff
                if pad + hist.len() != m.order - 1 && pad == 0 {
                    continue;
                }
                let s: f64 = (0..m.vocab_size()).map(|w| m.score(w, &hist).exp()).sum();
                assert!((s - 1.0).abs() < 1e-9, "context {ctx:?} sums to {s}");
            }
        }
    }

    #[test]
    fn unseen_context_backs_off() {
        let m = lm(&["ab"], 0.1);
        let z = m.vocab.iter().position(|&c| c == 'z').unwrap();
        let a = m.vocab.iter().position(|&c| c == 'a').unwrap();
        // "zzz" unseen at every order but the unigram
        let expected = 3.0 * 0.4f64.ln() + ((1.0 + 0.1) / (2.0 + 2.8f64)).ln();
        assert!((m.score(a, &[z, z, z]) - expected).abs() < 1e-12);
    }

    #[test]
    fn mle_limit() {
        let m = lm(&["ab", "ab"], 1e-9);
        let a = m.vocab.iter().position(|&c| c == 'a').unwrap();
        let b = m.vocab.iter().position(|&c| c == 'b').unwrap();
        assert!((m.score(b, &[a]).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_foreign_characters() {
        let err = train_lm(&["caf\u{e9}"], &Alphabet::default(), LmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains('\u{e9}')));
    }

    #[test]
    fn json_round_trip() {
        let m = lm(&["hello world"], 0.1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.json");
        m.save(&p).unwrap();
        assert_eq!(NGramModel::load(&p).unwrap(), m);
    }
}
