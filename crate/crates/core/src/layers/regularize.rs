use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

use super::Mode;

/// Per-element multipliers applied by a train-mode dropout pass
/// (`None` for an identity pass).
#[derive(Debug, Clone)]
pub struct DropoutMask<T>(Option<Vec<T>>);

/// Inverted dropout: zero each element with probability `rate` and scale the
/// survivors by `1/(1 − rate)`. Inference mode is the identity.
pub fn dropout<T: Scalar>(rate: f64, x: &Tensor<T>, rng: &mut Rng, mode: Mode) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x.clone(), DropoutMask(None)));
    }
    let keep = T::cast(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.uniform() < rate { T::zero() } else { keep })
        .collect();
    let y = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), y)?, DropoutMask(Some(mask))))
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    match &mask.0 {
        None => Ok(grad_out.clone()),
        Some(m) => {
            if m.len() != grad_out.len() {
                return Err(Error::Shape("dropout mask does not match gradient".into()));
            }
            let d = grad_out.data().iter().zip(m).map(|(&g, &k)| g * k).collect();
            Tensor::new(grad_out.shape().to_vec(), d)
        }
    }
}

/// Additive `N(0, std²)` noise in train mode; identity otherwise. The noise
/// is independent of the input, so the backward pass is the identity.
pub fn gaussian_noise<T: Scalar>(std: f64, x: &Tensor<T>, rng: &mut Rng, mode: Mode) -> Result<Tensor<T>> {
    if !(std >= 0.0) {
        return Err(Error::Parameter(format!("noise std must be >= 0, got {std}")));
    }
    if mode == Mode::Infer || std == 0.0 {
        return Ok(x.clone());
    }
    Ok(x.map(|v| v + T::cast(std * rng.standard_normal())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_zero_and_infer_are_identity() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f64>::uniform(&mut rng, vec![3, 4], -1.0, 1.0);
        for mode in [Mode::Train, Mode::Infer] {
            assert_eq!(dropout(0.0, &x, &mut rng, mode).unwrap().0, x);
        }
        assert_eq!(dropout(0.7, &x, &mut rng, Mode::Infer).unwrap().0, x);
    }

    #[test]
    fn bad_rate_rejected() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f64>::zeros(vec![2]);
        assert!(dropout(1.0, &x, &mut rng, Mode::Train).is_err());
        assert!(dropout(-0.1, &x, &mut rng, Mode::Train).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = Rng::new(5);
        let x = Tensor::filled(vec![100_000], 2.0f64);
        let (y, _) = dropout(0.5, &x, &mut rng, Mode::Train).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert!((mean - 2.0).abs() < 0.04, "mean {mean}");
    }

    #[test]
    fn noise_identity_cases() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f64>::uniform(&mut rng, vec![5], -1.0, 1.0);
        assert_eq!(gaussian_noise(0.0, &x, &mut rng, Mode::Train).unwrap(), x);
        assert_eq!(gaussian_noise(0.3, &x, &mut rng, Mode::Infer).unwrap(), x);
        assert!(gaussian_noise(-0.1, &x, &mut rng, Mode::Infer).is_err());
    }

    #[test]
    fn noise_has_requested_spread() {
        let mut rng = Rng::new(6);
        let x = Tensor::filled(vec![100_000], 1.0f64);
        let y = gaussian_noise(0.01, &x, &mut rng, Mode::Train).unwrap();
        let dev: Vec<f64> = y.data().iter().map(|v| v - 1.0).collect();
        let m = dev.iter().sum::<f64>() / dev.len() as f64;
        let s = (dev.iter().map(|d| (d - m).powi(2)).sum::<f64>() / dev.len() as f64).sqrt();
        assert!((s - 0.01).abs() < 0.0005, "std {s}");
    }
}
