//! Inception-style 1D convolutional classifier for leaf contours and time
//! series, with contour feature extraction, cross-validation harnesses,
//! classical downstream classifiers and backward-analysis tools.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod ccdc;
pub mod container;
pub mod dataio;
pub mod error;
pub mod interpret;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod shallow;
pub mod training;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{ContainerError, Error, Result};
pub use dataio::Dataset;
pub use numerics::{Rng, Tensor};
pub use scalar::Scalar;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = model::ModelState<f32>;
pub type Model64 = model::ModelState<f64>;
