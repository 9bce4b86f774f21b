//! Classical classifiers fitted on frozen network features.
//!
//! Features are `f64` rows; networks at either precision feed them via
//! [`crate::numerics::Tensor::cast`].

mod knn;
mod pca;
mod standardize;
mod svm;

pub use knn::{knn_predict, KnnModel};
pub use pca::{symmetric_eigen, PcaModel};
pub use standardize::Standardizer;
pub use svm::{SvmConfig, SvmModel};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Checks that `x` is a non-empty `[n × d]` matrix and returns `(n, d)`.
pub(crate) fn matrix_dims(x: &Tensor<f64>, what: &str) -> Result<(usize, usize)> {
    let (n, d) = x.dims2()?;
    if n == 0 || d == 0 {
        return Err(Error::Shape(format!("{what}: empty feature matrix {n}×{d}")));
    }
    Ok((n, d))
}

pub(crate) fn check_dim(expected: usize, found: usize, what: &str) -> Result<()> {
    if expected != found {
        return Err(Error::Shape(format!("{what}: expected {expected} features, got {found}")));
    }
    Ok(())
}
