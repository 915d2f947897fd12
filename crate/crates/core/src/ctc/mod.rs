//! Connectionist temporal classification: loss, greedy and beam decoding.

mod alphabet;
mod decode;
mod loss;

pub use alphabet::{Alphabet, BLANK};
pub use decode::{beam_search, beam_search_decode, greedy_decode, BeamConfig, BeamHypothesis, BeamResult};
pub use loss::{ctc_loss, ctc_loss_from_log_probs, min_frames, CtcResult};

/// `ln(e^a + e^b)` with `-inf` as the log of zero.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(e^x))` over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, log_add)
}
