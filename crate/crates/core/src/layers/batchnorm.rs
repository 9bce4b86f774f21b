use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

use super::Mode;

pub const DEFAULT_BN_EPSILON: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization.
///
/// Accepts `[b × c × L]` (statistics over batch and length) or `[b × c]`
/// (statistics over batch). Running statistics follow
/// `running = momentum · running + (1 − momentum) · batch`, using the biased
/// batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub epsilon: T,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    mode: Mode,
    x_hat: Tensor<T>,
    inv_std: Vec<T>,
}

/// Per-channel mean and biased variance of one training batch.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub d_input: Tensor<T>,
    pub d_gamma: Tensor<T>,
    pub d_beta: Tensor<T>,
}

/// `(batch, channels, inner)` view of a rank-2 or rank-3 activation.
fn layout<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, c] => Ok((b, c, 1)),
        [b, c, l] => Ok((b, c, l)),
        ref s => Err(Error::Shape(format!("batchnorm expects rank 2 or 3, got {s:?}"))),
    }
}

impl<T: Scalar> BatchNormParams<T> {
    pub fn new(channels: usize, epsilon: T, momentum: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::Parameter("batchnorm epsilon must be > 0".into()));
        }
        if !(momentum > T::zero() && momentum <= T::one()) {
            return Err(Error::Parameter("batchnorm momentum must lie in (0, 1]".into()));
        }
        Ok(BatchNormParams {
            gamma: Tensor::filled(vec![channels], T::one()),
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::filled(vec![channels], T::one()),
            momentum,
            epsilon,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `input`; in train mode also folds the batch statistics
    /// into the running estimates.
    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (y, cache, stats) = self.forward_batch(input, mode)?;
        if let Some(stats) = stats {
            self.update_running(&stats);
        }
        Ok((y, cache))
    }

    /// Inference-mode pass that leaves the parameters untouched.
    pub fn forward_infer(&self, input: &Tensor<T>) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (y, cache, _) = self.forward_batch(input, Mode::Infer)?;
        Ok((y, cache))
    }

    /// Normalizes without touching the running estimates; train mode also
    /// returns the batch statistics so the caller can fold them in later
    /// with [`BatchNormParams::update_running`].
    pub fn forward_batch(
        &self,
        input: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, BatchNormCache<T>, Option<BatchStats<T>>)> {
        let (b, c, inner) = layout(input)?;
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "batchnorm has {} channels, input has {c}",
                self.channels()
            )));
        }
        match mode {
            Mode::Train => {
                if b < 2 {
                    return Err(Error::Usage(format!(
                        "batchnorm in train mode needs batch >= 2, got {b}"
                    )));
                }
                let (mean, var) = batch_stats(input.data(), b, c, inner);
                let (y, cache) = self.normalize(input, mode, &mean, &var, b, c, inner);
                Ok((y, cache, Some(BatchStats { mean, var })))
            }
            Mode::Infer => {
                let (y, cache) = self.normalize(
                    input,
                    mode,
                    self.running_mean.data(),
                    self.running_var.data(),
                    b,
                    c,
                    inner,
                );
                Ok((y, cache, None))
            }
        }
    }

    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        let m = self.momentum;
        for (rm, &bm) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *rm = m * *rm + (T::one() - m) * bm;
        }
        for (rv, &bv) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *rv = m * *rv + (T::one() - m) * bv;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn normalize(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        mean: &[T],
        var: &[T],
        b: usize,
        c: usize,
        inner: usize,
    ) -> (Tensor<T>, BatchNormCache<T>) {
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.epsilon).sqrt()).collect();
        let x = input.data();
        let mut x_hat = vec![T::zero(); x.len()];
        let mut y = vec![T::zero(); x.len()];
        let (g, bt) = (self.gamma.data(), self.beta.data());
        for n in 0..b {
            for ch in 0..c {
                let off = (n * c + ch) * inner;
                for i in off..off + inner {
                    x_hat[i] = (x[i] - mean[ch]) * inv_std[ch];
                    y[i] = g[ch] * x_hat[i] + bt[ch];
                }
            }
        }
        let shape = input.shape().to_vec();
        (
            Tensor::new(shape.clone(), y).expect("shape preserved"),
            BatchNormCache {
                mode,
                x_hat: Tensor::new(shape, x_hat).expect("shape preserved"),
                inv_std,
            },
        )
    }

    /// Gradients through whichever statistics the forward pass used.
    ///
    /// In train mode the mean and variance depend on every element of the
    /// batch, which the input gradient accounts for.
    pub fn backward(&self, cache: &BatchNormCache<T>, grad_out: &Tensor<T>) -> Result<BatchNormGrads<T>> {
        if grad_out.shape() != cache.x_hat.shape() {
            return Err(Error::Shape("batchnorm upstream gradient shape mismatch".into()));
        }
        let (b, c, inner) = layout(grad_out)?;
        let dy = grad_out.data();
        let xh = cache.x_hat.data();
        let g = self.gamma.data();
        let mut d_gamma = vec![T::zero(); c];
        let mut d_beta = vec![T::zero(); c];
        for n in 0..b {
            for ch in 0..c {
                let off = (n * c + ch) * inner;
                for i in off..off + inner {
                    d_gamma[ch] += dy[i] * xh[i];
                    d_beta[ch] += dy[i];
                }
            }
        }
        let mut dx = vec![T::zero(); dy.len()];
        match cache.mode {
            Mode::Infer => {
                for n in 0..b {
                    for ch in 0..c {
                        let k = g[ch] * cache.inv_std[ch];
                        let off = (n * c + ch) * inner;
                        for i in off..off + inner {
                            dx[i] = dy[i] * k;
                        }
                    }
                }
            }
            Mode::Train => {
                let m = T::count(b * inner);
                for n in 0..b {
                    for ch in 0..c {
                        // dx = γ·inv_std/m · (m·dy − Σdy − x̂·Σ(dy·x̂))
                        let k = g[ch] * cache.inv_std[ch] / m;
                        let off = (n * c + ch) * inner;
                        for i in off..off + inner {
                            dx[i] = k * (m * dy[i] - d_beta[ch] - xh[i] * d_gamma[ch]);
                        }
                    }
                }
            }
        }
        Ok(BatchNormGrads {
            d_input: Tensor::new(grad_out.shape().to_vec(), dx)?,
            d_gamma: Tensor::new(vec![c], d_gamma)?,
            d_beta: Tensor::new(vec![c], d_beta)?,
        })
    }
}

/// Per-channel mean and biased variance.
fn batch_stats<T: Scalar>(x: &[T], b: usize, c: usize, inner: usize) -> (Vec<T>, Vec<T>) {
    let m = T::count(b * inner);
    let mut mean = vec![T::zero(); c];
    for n in 0..b {
        for ch in 0..c {
            let off = (n * c + ch) * inner;
            mean[ch] += x[off..off + inner].iter().copied().sum::<T>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![T::zero(); c];
    for n in 0..b {
        for ch in 0..c {
            let off = (n * c + ch) * inner;
            var[ch] += x[off..off + inner].iter().map(|&v| (v - mean[ch]) * (v - mean[ch])).sum::<T>();
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    (mean, var)
}
