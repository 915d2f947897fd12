mod common;

use common::{labelling_probabilities, probs_tensor, random_probs, rng};
use rand::Rng;

use eegvsr::ctc::{beam_search, greedy_decode, Alphabet, BeamConfig};
use eegvsr::lm::{train_lm, LmConfig};
use eegvsr::nn::Tensor;

#[test]
fn unpruned_beam_finds_the_most_probable_labelling() {
    let mut r = rng(0);
    for case in 0..100 {
        let t = r.random_range(1..=4);
        let probs = random_probs(t, 3, &mut r);
        let beta = if case % 2 == 0 { 0.0 } else { 0.6 };
        let cfg = BeamConfig {
            beam_width: 3usize.pow(t as u32) + 1,
            alpha: 0.0,
            beta,
        };
        let res = beam_search(&probs_tensor(&probs), &cfg, None).unwrap();
        let oracle = labelling_probabilities(&probs);
        let score = |l: &[usize], p: f64| p.ln() + beta * l.len() as f64;
        let best = oracle.iter().map(|(l, p)| score(l, *p)).fold(f64::NEG_INFINITY, f64::max);
        assert!((res.best.score - best).abs() < 1e-9, "case {case}");
        for (label, p) in &oracle {
            let hyp = res.beam.iter().find(|h| &h.prefix == label).expect("labelling kept");
            assert!((hyp.p_total() - p.ln()).abs() < 1e-9);
        }
    }
}

#[test]
fn width_one_matches_greedy_on_dominant_paths() {
    let mut r = rng(1);
    for _ in 0..100 {
        let t = r.random_range(1..=8);
        let c = r.random_range(2..=5);
        let mut rows = Vec::new();
        for _ in 0..t {
            let k = r.random_range(0..c);
            let rest = 0.1 / (c - 1) as f64;
            rows.push((0..c).map(|j| if j == k { 0.9 } else { rest }).collect::<Vec<_>>());
        }
        let probs = probs_tensor(&rows);
        let cfg = BeamConfig {
            beam_width: 1,
            alpha: 0.0,
            beta: 0.0,
        };
        assert_eq!(beam_search(&probs, &cfg, None).unwrap().best.prefix, greedy_decode(&probs));
    }
}

#[test]
fn best_hypothesis_heads_the_final_beam() {
    let mut r = rng(2);
    for _ in 0..50 {
        let probs = random_probs(6, 4, &mut r);
        let res = beam_search(&probs_tensor(&probs), &BeamConfig::default(), None).unwrap();
        assert!(res.beam.iter().all(|h| res.best.score >= h.score));
        assert!(res.beam.len() <= 16);
    }
}

#[test]
fn language_model_steers_between_acoustic_rivals() {
    let alphabet = Alphabet::default();
    let (a, b) = (alphabet.index_of('a').unwrap(), alphabet.index_of('b').unwrap());
    let row = |first: usize, second: usize| {
        let mut p = vec![0.0; alphabet.size()];
        p[0] = 0.1;
        p[first] = 0.46;
        p[second] = 0.44;
        p
    };
    let mut gap = vec![0.0; alphabet.size()];
    gap[0] = 0.9;
    gap[a] = 0.05;
    gap[b] = 0.05;
    let probs = Tensor::from_vec(&[3, alphabet.size()], [row(b, a), gap, row(a, b)].concat()).unwrap();
    let plain = beam_search(&probs, &BeamConfig::default(), None).unwrap();
    assert_eq!(alphabet.decode(&plain.best.prefix), "ba");
    let lm = train_lm(&["ab"], &alphabet, LmConfig::default()).unwrap();
    let fused = beam_search(&probs, &BeamConfig::default(), Some(&lm)).unwrap();
    assert_eq!(alphabet.decode(&fused.best.prefix), "ab");
}
