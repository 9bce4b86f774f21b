use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Output length of a valid (unpadded) strided convolution, or `None` when
/// the input is shorter than the kernel.
pub fn conv1d_output_len(len: usize, width: usize, stride: usize) -> Option<usize> {
    if width == 0 || stride == 0 || len < width {
        None
    } else {
        Some((len - width) / stride + 1)
    }
}

/// Kernels `[out_channels × in_channels × width]`, one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams<T> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads<T> {
    pub d_input: Tensor<T>,
    pub d_kernels: Tensor<T>,
    pub d_bias: Tensor<T>,
}

impl<T: Scalar> Conv1dParams<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>, stride: usize) -> Result<Self> {
        let (out_c, _, _) = kernels.dims3()?;
        if stride == 0 {
            return Err(Error::Parameter("conv stride must be >= 1".into()));
        }
        if bias.shape() != [out_c] {
            return Err(Error::Shape(format!(
                "conv bias shape {:?} does not match {out_c} output channels",
                bias.shape()
            )));
        }
        Ok(Conv1dParams {
            kernels,
            bias,
            stride,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[2]
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (b, c, l) = input.dims3()?;
        if c != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let out_len = conv1d_output_len(l, self.width(), self.stride).ok_or_else(|| {
            Error::Shape(format!("conv input length {l} shorter than kernel width {}", self.width()))
        })?;
        Ok((b, c, l, out_len))
    }

    /// Sliding-window inner products plus bias: `[b × in × L] → [b × out × L']`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c_in, l, out_len) = self.check_input(input)?;
        let (c_out, w, s) = (self.out_channels(), self.width(), self.stride);
        let x = input.data();
        let k = self.kernels.data();
        let mut out = vec![T::zero(); b * c_out * out_len];
        for n in 0..b {
            for o in 0..c_out {
                let dst = &mut out[(n * c_out + o) * out_len..(n * c_out + o + 1) * out_len];
                for (j, y) in dst.iter_mut().enumerate() {
                    let mut acc = self.bias.data()[o];
                    for ci in 0..c_in {
                        let src = &x[(n * c_in + ci) * l + j * s..][..w];
                        let ker = &k[(o * c_in + ci) * w..][..w];
                        acc += crate::numerics::tensor_dot(src, ker);
                    }
                    *y = acc;
                }
            }
        }
        Tensor::new(vec![b, c_out, out_len], out)
    }

    /// Exact gradients given the upstream gradient of the forward output.
    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Conv1dGrads<T>> {
        let (b, c_in, l, out_len) = self.check_input(input)?;
        let (c_out, w, s) = (self.out_channels(), self.width(), self.stride);
        if grad_out.shape() != [b, c_out, out_len] {
            return Err(Error::Shape(format!(
                "conv upstream gradient {:?} does not match output [{b}, {c_out}, {out_len}]",
                grad_out.shape()
            )));
        }
        let x = input.data();
        let k = self.kernels.data();
        let g = grad_out.data();
        let mut dx = vec![T::zero(); x.len()];
        let mut dk = vec![T::zero(); k.len()];
        let mut db = vec![T::zero(); c_out];
        for n in 0..b {
            for o in 0..c_out {
                let go = &g[(n * c_out + o) * out_len..][..out_len];
                for (j, &gv) in go.iter().enumerate() {
                    db[o] += gv;
                    for ci in 0..c_in {
                        let xi = (n * c_in + ci) * l + j * s;
                        let ki = (o * c_in + ci) * w;
                        for t in 0..w {
                            dk[ki + t] += gv * x[xi + t];
                            dx[xi + t] += gv * k[ki + t];
                        }
                    }
                }
            }
        }
        Ok(Conv1dGrads {
            d_input: Tensor::new(input.shape().to_vec(), dx)?,
            d_kernels: Tensor::new(self.kernels.shape().to_vec(), dk)?,
            d_bias: Tensor::new(vec![c_out], db)?,
        })
    }
}
