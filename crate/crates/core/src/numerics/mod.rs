//! Shaped arrays and seeded randomness.

mod rng;
mod tensor;

pub use rng::Rng;
pub use tensor::Tensor;
pub(crate) use tensor::dot as tensor_dot;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Draws `n` samples from `N(mean, std²)`.
///
/// A zero `std` yields the constant `mean` without consuming randomness.
pub fn gaussian_draw<T: Scalar>(rng: &mut Rng, mean: T, std: T, n: usize) -> Result<Tensor<T>> {
    if !(std >= T::zero()) {
        return Err(Error::Parameter(format!("gaussian std must be >= 0, got {std}")));
    }
    if n == 0 {
        return Err(Error::Parameter("gaussian draw needs n >= 1".into()));
    }
    let data = if std == T::zero() {
        vec![mean; n]
    } else {
        (0..n).map(|_| mean + std * T::cast(rng.standard_normal())).collect()
    };
    Tensor::new(vec![n], data)
}

/// Standard matrix product of two rank-2 tensors.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.matmul(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_is_constant() {
        let mut rng = Rng::new(7);
        let t = gaussian_draw(&mut rng, 0.0f64, 0.0, 4).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
        let t = gaussian_draw(&mut rng, 5.0f64, 0.0, 2).unwrap();
        assert_eq!(t.data(), &[5.0, 5.0]);
    }

    #[test]
    fn negative_std_rejected() {
        let mut rng = Rng::new(7);
        assert!(matches!(
            gaussian_draw(&mut rng, 0.0f64, -1.0, 3),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn standard_normal_moments() {
        // std error of the mean is 1/sqrt(1e5) ~ 0.0032, of the std ~ 0.0022
        let mut rng = Rng::new(7);
        let t = gaussian_draw(&mut rng, 0.0f64, 1.0, 100_000).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn small_matmul_by_hand() {
        let a = Tensor::new(vec![2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 1], vec![1.0f64, 1.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn identity_matmul() {
        let mut rng = Rng::new(3);
        let a = Tensor::<f64>::uniform(&mut rng, vec![3, 5], -1.0, 1.0);
        let c = matmul(&Tensor::identity(3), &a).unwrap();
        assert_eq!(c.data(), a.data());
    }

    #[test]
    fn matmul_against_triple_loop() {
        let mut rng = Rng::new(11);
        let a = Tensor::<f64>::uniform(&mut rng, vec![5, 4], -1.0, 1.0);
        let b = Tensor::<f64>::uniform(&mut rng, vec![4, 6], -1.0, 1.0);
        let c = matmul(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..6 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.data()[i * 4 + k] * b.data()[k * 6 + j];
                }
                assert!((c.data()[i * 6 + j] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Tensor::<f64>::zeros(vec![2, 3]);
        let b = Tensor::<f64>::zeros(vec![2, 3]);
        assert!(matches!(matmul(&a, &b), Err(Error::Shape(_))));
    }
}
