mod common;

use common::{layer_fd, random_tensor, randomize, rng, FdStats, Layer, FD_REL_TOL};
use rand::Rng;

use eegvsr::ctc::ctc_loss_from_log_probs;
use eegvsr::nn::{dropout, log_softmax, AdamConfig, AdamState, Dense, Gru, Initializer, TcnBlock, Tensor};

const SEEDS: u64 = 20;

fn check(layer: Layer) -> FdStats {
    let mut total = FdStats::default();
    for seed in 0..SEEDS {
        total.merge(layer_fd(layer, seed));
    }
    assert!(total.checked > 0, "{layer:?}: nothing checked");
    assert!(
        total.max_rel_error < FD_REL_TOL,
        "{layer:?}: max relative error {:.3e} over {} entries",
        total.max_rel_error,
        total.checked
    );
    total
}

#[test]
fn dense_gradients() {
    check(Layer::Dense);
}

#[test]
fn gru_gradients() {
    check(Layer::Gru);
}

#[test]
fn conv2d_gradients() {
    check(Layer::Conv2d);
}

#[test]
fn maxpool_gradients() {
    check(Layer::MaxPool);
}

#[test]
fn causal_conv_gradients() {
    check(Layer::CausalConv);
}

#[test]
fn tcn_gradients_with_projection() {
    check(Layer::TcnProjected);
}

#[test]
fn tcn_gradients_identity_residual() {
    check(Layer::TcnIdentity);
}

#[test]
fn ctc_through_softmax_gradients() {
    assert_eq!(check(Layer::CtcSoftmax).kinks, 0);
}

#[test]
fn dense_bias_gradient_by_hand() {
    let mut layer = Dense::new(&mut Initializer::new(0), "d", 2, 2);
    let x = Tensor::from_vec(&[1, 2], vec![0.5, -1.5]).unwrap();
    let dy = Tensor::from_vec(&[1, 2], vec![0.25, -2.0]).unwrap();
    let dx = layer.backward(&x, &dy).unwrap();
    assert_eq!(layer.bias.grad.data(), &[0.25, -2.0]);
    let wv = layer.weight.value.data().to_vec();
    assert_eq!(layer.weight.grad.data(), &[0.125, -1.0, -0.375, 3.0]);
    assert!((dx.data()[0] - (0.25 * wv[0] - 2.0 * wv[1])).abs() < 1e-15);
    assert!((dx.data()[1] - (0.25 * wv[2] - 2.0 * wv[3])).abs() < 1e-15);
}

#[test]
fn zero_upstream_gradient_gives_zero_gradients() {
    let mut init = Initializer::new(3);
    let mut r = rng(3);
    let mut gru = Gru::new(&mut init, "g", 3, 4);
    randomize(gru.params_mut(), &mut r);
    let x = random_tensor(&[5, 3], -1.0, 1.0, &mut r);
    let (_, cache) = gru.forward(&x, None).unwrap();
    let dx = gru.backward(&cache, &Tensor::zeros(&[5, 4])).unwrap();
    assert!(dx.data().iter().all(|&v| v == 0.0));
    assert!(gru.params().iter().all(|p| p.grad.data().iter().all(|&v| v == 0.0)));

    let mut tcn = TcnBlock::new(&mut init, "t", 3, 4);
    randomize(tcn.params_mut(), &mut r);
    let (_, cache) = tcn.forward(&x).unwrap();
    let dx = tcn.backward(&cache, &Tensor::zeros(&[5, 4])).unwrap();
    assert!(dx.data().iter().all(|&v| v == 0.0));
    assert!(tcn.params().iter().all(|p| p.grad.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn tcn_output_is_causal() {
    for seed in 0..SEEDS {
        let mut r = rng(seed);
        let mut block = TcnBlock::new(&mut Initializer::new(seed), "t", 3, 4);
        randomize(block.params_mut(), &mut r);
        let x = random_tensor(&[8, 3], -1.0, 1.0, &mut r);
        let t0 = r.random_range(0..8);
        let mut x2 = x.clone();
        for v in &mut x2.data_mut()[t0 * 3..] {
            *v += r.random_range(-1.0..1.0);
        }
        let (y, _) = block.forward(&x).unwrap();
        let (y2, _) = block.forward(&x2).unwrap();
        assert_eq!(&y.data()[..t0 * 4], &y2.data()[..t0 * 4]);
    }
}

#[test]
fn initialization_and_dropout_are_deterministic() {
    let a = Gru::new(&mut Initializer::new(11), "g", 5, 6);
    let b = Gru::new(&mut Initializer::new(11), "g", 5, 6);
    let c = Gru::new(&mut Initializer::new(12), "g", 5, 6);
    assert_eq!(a.w.value, b.w.value);
    assert_ne!(a.w.value, c.w.value);

    let x = random_tensor(&[10, 10], -1.0, 1.0, &mut rng(0));
    let (y1, m1) = dropout(&x, 0.3, true, &mut rng(5)).unwrap();
    let (y2, m2) = dropout(&x, 0.3, true, &mut rng(5)).unwrap();
    assert_eq!(y1, y2);
    assert_eq!(m1, m2);
    let (y3, m3) = dropout(&x, 0.3, false, &mut rng(5)).unwrap();
    assert_eq!(y3, x);
    assert!(m3.is_none());
}

#[test]
fn repeated_training_cycles_stay_finite() {
    let mut init = Initializer::new(1);
    let mut r = rng(1);
    let mut gru = Gru::new(&mut init, "g", 3, 4);
    let mut head = Dense::new(&mut init, "d", 4, 3);
    let mut adam = {
        let mut params = gru.params();
        params.extend(head.params());
        AdamState::new(AdamConfig::default(), &params)
    };
    let x = random_tensor(&[6, 3], -1.0, 1.0, &mut r);
    for _ in 0..1000 {
        let (h, cache) = gru.forward(&x, None).unwrap();
        let logits = head.forward(&h).unwrap();
        let res = ctc_loss_from_log_probs(&log_softmax(&logits), &[1, 2], 6).unwrap();
        assert!(res.loss.is_finite());
        let dh = head.backward(&h, &res.grad).unwrap();
        gru.backward(&cache, &dh).unwrap();
        let mut params = gru.params_mut();
        params.extend(head.params_mut());
        adam.update(&mut params).unwrap();
        for p in params {
            assert!(p.value.all_finite() && p.grad.all_finite());
            p.grad.fill(0.0);
        }
    }
}
