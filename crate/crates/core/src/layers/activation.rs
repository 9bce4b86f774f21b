use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Upstream gradient masked to positions where the input was positive.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(grad_out, |v, g| if v > T::zero() { g } else { T::zero() })
}

/// Parametric ReLU: `x` for `x ≥ 0`, `α·x` otherwise.
///
/// `alpha` holds either one slope shared by the whole layer or one slope per
/// channel (axis 1 of the input).
#[derive(Debug, Clone, PartialEq)]
pub struct PReluParams<T> {
    pub alpha: Tensor<T>,
}

impl<T: Scalar> PReluParams<T> {
    pub fn shared(alpha: T) -> Self {
        PReluParams {
            alpha: Tensor::filled(vec![1], alpha),
        }
    }

    pub fn per_channel(channels: usize, alpha: T) -> Self {
        PReluParams {
            alpha: Tensor::filled(vec![channels], alpha),
        }
    }

    fn slope_index(&self, x: &Tensor<T>) -> Result<impl Fn(usize) -> usize> {
        let n = self.alpha.len();
        let shape = x.shape();
        let (channels, inner) = match shape.len() {
            1 => (shape[0], 1),
            2 => (shape[1], 1),
            3 => (shape[1], shape[2]),
            _ => return Err(Error::Shape(format!("prelu input rank {}", shape.len()))),
        };
        if n != 1 && n != channels {
            return Err(Error::Shape(format!("prelu has {n} slopes for {channels} channels")));
        }
        Ok(move |i: usize| if n == 1 { 0 } else { (i / inner) % channels })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let idx = self.slope_index(x)?;
        let a = self.alpha.data();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if v >= T::zero() { v } else { a[idx(i)] * v })
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    /// Returns `(d_input, d_alpha)`; `d_alpha` sums `upstream · x` over
    /// negative inputs.
    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        if x.shape() != grad_out.shape() {
            return Err(Error::Shape("prelu upstream gradient shape mismatch".into()));
        }
        let idx = self.slope_index(x)?;
        let a = self.alpha.data();
        let mut d_alpha = vec![T::zero(); a.len()];
        let mut dx = Vec::with_capacity(x.len());
        for (i, (&v, &g)) in x.data().iter().zip(grad_out.data()).enumerate() {
            if v >= T::zero() {
                dx.push(g);
            } else {
                let k = idx(i);
                dx.push(a[k] * g);
                d_alpha[k] += g * v;
            }
        }
        Ok((
            Tensor::new(x.shape().to_vec(), dx)?,
            Tensor::new(self.alpha.shape().to_vec(), d_alpha)?,
        ))
    }
}
