use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Channel-wise max pooling over `[b × c × L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pub window: usize,
    pub stride: usize,
}

/// Flat input index of the winning element for every pooled output.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPool1d {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::Parameter("pool window and stride must be >= 1".into()));
        }
        Ok(MaxPool1d { window, stride })
    }

    pub fn output_len(&self, len: usize) -> Option<usize> {
        super::conv1d_output_len(len, self.window, self.stride)
    }

    pub fn forward<T: Scalar>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
        let (b, c, l) = input.dims3()?;
        let out_len = self.output_len(l).ok_or_else(|| {
            Error::Shape(format!("pool input length {l} shorter than window {}", self.window))
        })?;
        let x = input.data();
        let mut out = Vec::with_capacity(b * c * out_len);
        let mut argmax = Vec::with_capacity(b * c * out_len);
        for row in 0..b * c {
            let base = row * l;
            for j in 0..out_len {
                let start = base + j * self.stride;
                // strict comparison keeps the first index on ties
                let mut best = start;
                for i in start + 1..start + self.window {
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
        Ok((
            Tensor::new(vec![b, c, out_len], out)?,
            PoolIndices {
                input_shape: input.shape().to_vec(),
                argmax,
            },
        ))
    }

    /// Routes every upstream element to its argmax position.
    pub fn backward<T: Scalar>(&self, indices: &PoolIndices, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if grad_out.len() != indices.argmax.len() {
            return Err(Error::Shape("pool upstream gradient does not match pooled output".into()));
        }
        let mut dx = Tensor::zeros(indices.input_shape.clone());
        let d = dx.data_mut();
        for (&i, &g) in indices.argmax.iter().zip(grad_out.data()) {
            d[i] += g;
        }
        Ok(dx)
    }
}
