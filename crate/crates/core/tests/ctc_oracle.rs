mod common;

use common::{brute_force_ctc, collapse, probs_tensor, random_probs, random_tensor, rng};
use rand::Rng;

use eegvsr::ctc::{ctc_loss, ctc_loss_from_log_probs, min_frames};
use eegvsr::nn::{log_softmax, softmax, Tensor};

fn random_label(r: &mut impl Rng, classes: usize, max_len: usize) -> Vec<usize> {
    (0..r.random_range(0..=max_len)).map(|_| r.random_range(1..classes)).collect()
}

#[test]
fn loss_matches_path_enumeration() {
    let mut r = rng(0);
    let mut checked = 0;
    for _ in 0..300 {
        let t = r.random_range(1..=6);
        let c = r.random_range(2..=4);
        let label = random_label(&mut r, c, 3);
        let probs = random_probs(t, c, &mut r);
        let res = ctc_loss(&probs_tensor(&probs), &label, t).unwrap();
        if min_frames(&label) > t {
            assert!(!res.feasible);
            assert_eq!(res.loss, f64::INFINITY);
            continue;
        }
        let oracle = brute_force_ctc(&probs, &label);
        assert!((res.loss - oracle).abs() < 1e-9, "T={t} C={c} {label:?}: {} vs {oracle}", res.loss);
        checked += 1;
    }
    assert!(checked > 200);
}

/// `dL/dlogit[t][k] = y[t][k] - P(pi_t = k | label)`, with the posterior
/// taken over enumerated alignments.
#[test]
fn gradient_matches_alignment_posteriors() {
    let mut r = rng(1);
    for _ in 0..100 {
        let t = r.random_range(2..=5);
        let c = r.random_range(2..=4);
        let logits = random_tensor(&[t, c], -2.0, 2.0, &mut r);
        let label = random_label(&mut r, c, 2);
        if min_frames(&label) > t {
            continue;
        }
        let y = softmax(&logits);
        let rows: Vec<Vec<f64>> = (0..t).map(|i| y.row(i).to_vec()).collect();
        let mut occupancy = vec![0.0; t * c];
        let mut total = 0.0;
        let mut path = vec![0usize; t];
        'paths: loop {
            if collapse(&path) == label {
                let p: f64 = path.iter().enumerate().map(|(i, &k)| rows[i][k]).product();
                total += p;
                for (i, &k) in path.iter().enumerate() {
                    occupancy[i * c + k] += p;
                }
            }
            for slot in path.iter_mut() {
                *slot += 1;
                if *slot < c {
                    continue 'paths;
                }
                *slot = 0;
            }
            break;
        }
        let res = ctc_loss_from_log_probs(&log_softmax(&logits), &label, t).unwrap();
        for i in 0..t * c {
            let expected = y.data()[i] - occupancy[i] / total;
            assert!((res.grad.data()[i] - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn rows_past_true_length_are_ignored() {
    let mut r = rng(2);
    let probs = random_probs(6, 3, &mut r);
    let label = vec![1, 2];
    let short = ctc_loss(&probs_tensor(&probs[..4]), &label, 4).unwrap();
    let padded = ctc_loss(&probs_tensor(&probs), &label, 4).unwrap();
    assert!((short.loss - padded.loss).abs() < 1e-12);
    assert!(padded.grad.data()[4 * 3..].iter().all(|&g| g == 0.0));
}

/// Moving mass onto the only alignment of a label can only lower its loss.
#[test]
fn sharpening_the_unique_alignment_lowers_loss() {
    let mut r = rng(3);
    for _ in 0..50 {
        let label = vec![1, 2, 1];
        let mut probs = random_probs(3, 3, &mut r);
        let mut last = ctc_loss(&probs_tensor(&probs), &label, 3).unwrap().loss;
        for _ in 0..5 {
            for (t, &k) in label.iter().enumerate() {
                for (j, p) in probs[t].iter_mut().enumerate() {
                    *p = if j == k { 0.5 + *p / 2.0 } else { *p / 2.0 };
                }
            }
            let loss = ctc_loss(&probs_tensor(&probs), &label, 3).unwrap().loss;
            assert!(loss < last);
            last = loss;
        }
    }
}

#[test]
fn empty_label_is_all_blank() {
    let probs = Tensor::from_vec(&[3, 2], vec![0.5, 0.5, 0.25, 0.75, 1.0, 0.0]).unwrap();
    let res = ctc_loss(&probs, &[], 3).unwrap();
    assert!((res.loss - -(0.5f64 * 0.25).ln()).abs() < 1e-12);
}
