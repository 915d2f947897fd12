use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use eegvsr::dsp::{
    apply_filter, design_bandpass, design_notch, extract_mfcc, log_mel_energies, stat_features, AudioRecording,
    BiquadCascade, MfccConfig, DEFAULT_NOTCH_Q,
};

const FS: f64 = 1000.0;

fn bandpass() -> BiquadCascade {
    design_bandpass(4, 0.1, 70.0, FS).unwrap()
}

fn notch() -> BiquadCascade {
    design_notch(60.0, FS, DEFAULT_NOTCH_Q).unwrap()
}

/// Numerator and denominator polynomials in `z^-1` of the whole cascade.
fn polynomials(f: &BiquadCascade) -> (Vec<f64>, Vec<f64>) {
    let mul = |a: &[f64], b: &[f64]| {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    f.sections.iter().fold((vec![1.0], vec![1.0]), |(num, den), s| {
        (mul(&num, &[s.b0, s.b1, s.b2]), mul(&den, &[1.0, s.a1, s.a2]))
    })
}

/// Product of per-section `|B(z) / A(z)|` at `z = exp(j 2 pi f / fs)`.
fn magnitude(f: &BiquadCascade, hz: f64) -> f64 {
    let zinv = Complex64::from_polar(1.0, -2.0 * PI * hz / FS);
    let eval = |p: [f64; 3]| p[0] + zinv * (p[1] + zinv * p[2]);
    f.sections
        .iter()
        .map(|s| (eval([s.b0, s.b1, s.b2]) / eval([1.0, s.a1, s.a2])).norm())
        .product()
}

#[test]
fn bandpass_passes_alpha_and_rejects_high_gamma() {
    let f = bandpass();
    assert!(magnitude(&f, 10.0) >= 0.95);
    assert!(magnitude(&f, 200.0) <= 0.03);
    for hz in [1.0, 10.0, 70.0, 200.0] {
        assert!((magnitude(&f, hz) - f.magnitude_at(hz, FS)).abs() < 1e-9);
    }
}

#[test]
fn notch_removes_mains_only() {
    let f = notch();
    assert!(magnitude(&f, 60.0) <= 0.1);
    assert!(magnitude(&f, 10.0) >= 0.95);
    assert!((magnitude(&f, 60.0) - f.magnitude_at(60.0, FS)).abs() < 1e-9);
}

#[test]
fn impulse_response_matches_long_division() {
    for f in [bandpass(), notch()] {
        let (num, den) = polynomials(&f);
        let mut h = Vec::new();
        let mut rem = num.clone();
        rem.resize(8 + den.len(), 0.0);
        for n in 0..8 {
            let q = rem[n] / den[0];
            for (k, d) in den.iter().enumerate() {
                rem[n + k] -= q * d;
            }
            h.push(q);
        }
        let mut impulse = vec![0.0; 8];
        impulse[0] = 1.0;
        let y = apply_filter(&impulse, &f).unwrap();
        for (a, b) in y.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn impulse_response_decays() {
    for f in [bandpass(), notch()] {
        assert!(f.is_stable());
        let mut impulse = vec![0.0; 100_000];
        impulse[0] = 1.0;
        let y = apply_filter(&impulse, &f).unwrap();
        let tail = y[90_000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(tail < 1e-6, "tail {tail}");
    }
}

#[test]
fn tone_energy_lands_in_the_covering_mel_bands() {
    let cfg = MfccConfig::default();
    let audio = AudioRecording {
        samples: (0..16_000).map(|i| (2.0 * PI * 1000.0 * i as f64 / 16_000.0).sin()).collect(),
        sample_rate_hz: 16_000,
    };
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(cfg.f_max);
    let edges: Vec<f64> = (0..cfg.n_mels + 2).map(|i| hz(top * i as f64 / (cfg.n_mels + 1) as f64)).collect();
    for frame in log_mel_energies(&audio, &cfg).unwrap().iter().skip(1) {
        let best = (0..cfg.n_mels).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
        assert!(edges[best] < 1000.0 && 1000.0 < edges[best + 2], "band {best}");
    }
}

proptest! {
    #[test]
    fn filtering_is_linear(
        x in prop::collection::vec(-100.0f64..100.0, 64),
        y in prop::collection::vec(-100.0f64..100.0, 64),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let f = bandpass();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let fx = apply_filter(&x, &f).unwrap();
        let fy = apply_filter(&y, &f).unwrap();
        let fm = apply_filter(&mix, &f).unwrap();
        for i in 0..64 {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9 * (1.0 + fm[i].abs()));
        }
    }

    #[test]
    fn stat_features_ignore_sign_except_mean(w in prop::collection::vec(-50.0f64..50.0, 2..200)) {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let (p, n) = (stat_features(&w).unwrap(), stat_features(&neg).unwrap());
        prop_assert!((p.rms - n.rms).abs() < 1e-12);
        prop_assert_eq!(p.zcr, n.zcr);
        prop_assert!((p.mwa + n.mwa).abs() < 1e-12);
        prop_assert!((p.kurtosis - n.kurtosis).abs() < 1e-9 * (1.0 + p.kurtosis));
        prop_assert!((p.pse - n.pse).abs() < 1e-9);
    }

    #[test]
    fn mfcc_frame_count(len in 400usize..8000) {
        let audio = AudioRecording {
            samples: (0..len).map(|i| (i as f64 * 0.37).sin()).collect(),
            sample_rate_hz: 16_000,
        };
        let f = extract_mfcc(&audio, &MfccConfig::default()).unwrap();
        prop_assert_eq!(f.frames(), (len - 400) / 160 + 1);
        prop_assert_eq!(f.dim(), 13);
    }
}
