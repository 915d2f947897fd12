//! IIR filter design (Butterworth band-pass, notch) as cascaded biquads.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Notch quality factor used by the EEG pipeline.
pub const DEFAULT_NOTCH_Q: f64 = 30.0;

/// One second-order section, normalised so that `a0 == 1`:
///
/// ```text
///         b0 + b1 z^-1 + b2 z^-2
/// H(z) = ------------------------
///          1 + a1 z^-1 + a2 z^-2
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Complex response at normalised angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b0 + z1 * self.b1 + z2 * self.b2;
        let den = 1.0 + z1 * self.a1 + z2 * self.a2;
        num / den
    }

    /// Poles of the section, i.e. roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }
}

/// A cascade of biquad sections applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
}

impl BiquadCascade {
    pub fn new(sections: Vec<Biquad>) -> Result<Self> {
        if let Some(i) = sections.iter().position(|s| !s.is_stable()) {
            return Err(Error::Numeric(format!("biquad section {i} is unstable")));
        }
        Ok(Self { sections })
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    /// `|H|` at `freq_hz` for a signal sampled at `fs_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        self.response(2.0 * PI * freq_hz / fs_hz).norm()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }
}

/// Butterworth band-pass of prototype order `order`, realised as `order` biquads
/// (so the overall transfer function has degree `2 * order`).
///
/// Cutoffs are pre-warped for the bilinear transform, so the magnitude is
/// `1/sqrt(2)` at `low_hz` and `high_hz` and exactly 1 at the geometric centre.
pub fn design_bandpass(order: usize, low_hz: f64, high_hz: f64, fs_hz: f64) -> Result<BiquadCascade> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::Parameter(format!(
            "band-pass order must be a positive even number, got {order}"
        )));
    }
    if !(fs_hz > 0.0 && low_hz > 0.0 && low_hz < high_hz && high_hz < fs_hz / 2.0) {
        return Err(Error::Parameter(format!(
            "band-pass requires 0 < low < high < fs/2, got low={low_hz} high={high_hz} fs={fs_hz}"
        )));
    }

    let warp = |f: f64| 2.0 * fs_hz * (PI * f / fs_hz).tan();
    let w_low = warp(low_hz);
    let w_high = warp(high_hz);
    let bandwidth = w_high - w_low;
    let w0_sq = w_low * w_high;

    let bilinear = |s: Complex64| (1.0 + s / (2.0 * fs_hz)) / (1.0 - s / (2.0 * fs_hz));

    let mut sections = Vec::with_capacity(order);
    // Upper-half-plane prototype poles; their conjugates give the mirrored sections.
    for k in 0..order / 2 {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        // s^2 - p*B*s + W0^2 = 0
        let pb = proto * bandwidth;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        for analog in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
            let z = bilinear(analog);
            sections.push(Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            });
        }
    }

    // Unity gain at the digital image of the analog centre frequency.
    let omega0 = 2.0 * (w0_sq.sqrt() / (2.0 * fs_hz)).atan();
    for s in &mut sections {
        let g = 1.0 / s.response(omega0).norm();
        s.b0 *= g;
        s.b1 *= g;
        s.b2 *= g;
    }
    BiquadCascade::new(sections)
}

/// Second-order IIR notch with zeros on the unit circle at `center_hz`.
pub fn design_notch(center_hz: f64, fs_hz: f64, q: f64) -> Result<BiquadCascade> {
    if !(fs_hz > 0.0 && center_hz > 0.0 && center_hz < fs_hz / 2.0) {
        return Err(Error::Parameter(format!(
            "notch centre must satisfy 0 < f < fs/2, got f={center_hz} fs={fs_hz}"
        )));
    }
    if !(q > 0.0) {
        return Err(Error::Parameter(format!("notch quality factor must be > 0, got {q}")));
    }
    let w0 = 2.0 * PI * center_hz / fs_hz;
    let beta = (w0 / q / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    BiquadCascade::new(vec![Biquad {
        b0: gain,
        b1: -2.0 * gain * c,
        b2: gain,
        a1: -2.0 * gain * c,
        a2: 2.0 * gain - 1.0,
    }])
}

/// Causal filtering with zero initial state (transposed direct form II per section).
pub fn apply_filter(x: &[f64], filter: &BiquadCascade) -> Result<Vec<f64>> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at index {i}")));
    }
    let mut y = x.to_vec();
    for s in &filter.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b0 * input + z1;
            z1 = s.b1 * input - s.a1 * out + z2;
            z2 = s.b2 * input - s.a2 * out;
            *v = out;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandpass_is_minus_3db_at_cutoffs() {
        let bp = design_bandpass(4, 0.1, 70.0, 1000.0).unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((bp.magnitude_at(0.1, 1000.0) - inv_sqrt2).abs() < 1e-6);
        assert!((bp.magnitude_at(70.0, 1000.0) - inv_sqrt2).abs() < 1e-6);
        assert_eq!(bp.sections.len(), 4);
    }

    #[test]
    fn bandpass_rejects_bad_ordering() {
        assert!(matches!(design_bandpass(4, 70.0, 70.0, 1000.0), Err(Error::Parameter(_))));
        assert!(matches!(design_bandpass(4, 0.1, 600.0, 1000.0), Err(Error::Parameter(_))));
        assert!(matches!(design_bandpass(3, 0.1, 70.0, 1000.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn notch_rejects_above_nyquist() {
        assert!(matches!(design_notch(600.0, 1000.0, 30.0), Err(Error::Parameter(_))));
        assert!(matches!(design_notch(60.0, 1000.0, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn filter_rejects_nan() {
        let n = design_notch(60.0, 1000.0, 30.0).unwrap();
        assert!(matches!(apply_filter(&[0.0, f64::NAN], &n), Err(Error::Data(_))));
    }

    #[test]
    fn zero_in_zero_out() {
        let bp = design_bandpass(4, 0.1, 70.0, 1000.0).unwrap();
        let y = apply_filter(&[0.0; 64], &bp).unwrap();
        assert_eq!(y.len(), 64);
        assert!(y.iter().all(|&v| v == 0.0));
    }
}
