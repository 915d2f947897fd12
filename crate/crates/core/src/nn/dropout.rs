use rand::Rng;

use super::Tensor;
use crate::{Error, Result};

/// Inverted dropout mask: each entry is 0 with probability `rate`, otherwise `1/(1-rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Applies inverted dropout when `training`; identity otherwise.
/// Returns the output and the mask used (`None` for the identity case).
pub fn dropout<R: Rng + ?Sized>(x: &Tensor, rate: f64, training: bool, rng: &mut R) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let mask = dropout_mask(x.len(), rate, rng)?;
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((y, Some(mask)))
}

pub fn dropout_backward(dout: &Tensor, mask: Option<&[f64]>) -> Tensor {
    match mask {
        None => dout.clone(),
        Some(mask) => {
            let mut dx = dout.clone();
            for (v, m) in dx.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
            dx
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(&[2, 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(dropout(&x, 0.1, false, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap().0, x);
        assert!(matches!(dropout(&x, 1.0, true, &mut rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::from_vec(&[100_000], vec![2.0; 100_000]).unwrap();
        let (y, mask) = dropout(&x, 0.1, true, &mut rng).unwrap();
        let mean = y.data().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
        let dropped = mask.unwrap().iter().filter(|&&m| m == 0.0).count();
        assert!((dropped as f64 / 1e5 - 0.1).abs() < 0.005);
    }
}
