use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Param, Tensor};

/// Deterministic parameter factory: Glorot-uniform weights, zero biases.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn glorot(&mut self, name: &str, shape: &[usize], fan_in: usize, fan_out: usize) -> Param {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.rng.random_range(-bound..bound)).collect();
        Param::new(name, Tensor::from_vec(shape, data).expect("shape product"))
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Param {
        Param::new(name, Tensor::zeros(shape))
    }
}
