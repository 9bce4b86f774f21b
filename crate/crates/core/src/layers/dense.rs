use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Fully connected layer: `y = x · Wᵀ + b` with `W` stored `[out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub d_input: Tensor<T>,
    pub d_weights: Tensor<T>,
    pub d_bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (out, _) = weights.dims2()?;
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "dense bias {:?} does not match {out} outputs",
                bias.shape()
            )));
        }
        Ok(DenseParams { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, d) = x.dims2()?;
        if d != self.inputs() {
            return Err(Error::Shape(format!("dense expects {} inputs, got {d}", self.inputs())));
        }
        let mut y = x.matmul_nt(&self.weights)?;
        let out = self.outputs();
        for row in y.data_mut().chunks_mut(out) {
            for (v, &b) in row.iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<DenseGrads<T>> {
        let (b, _) = x.dims2()?;
        if grad_out.shape() != [b, self.outputs()] {
            return Err(Error::Shape("dense upstream gradient shape mismatch".into()));
        }
        let mut d_bias = vec![T::zero(); self.outputs()];
        for row in grad_out.data().chunks(self.outputs()) {
            for (d, &g) in d_bias.iter_mut().zip(row) {
                *d += g;
            }
        }
        Ok(DenseGrads {
            d_input: grad_out.matmul(&self.weights)?,
            d_weights: grad_out.matmul_tn(x)?,
            d_bias: Tensor::new(vec![self.outputs()], d_bias)?,
        })
    }
}
