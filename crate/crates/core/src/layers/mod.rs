//! Forward and backward passes for every layer the classifier uses.
//!
//! Layers are plain parameter structs with `forward`/`backward` methods;
//! anything a backward pass needs is returned from `forward` explicitly
//! rather than stashed inside the layer.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod loss;
mod pool;
mod regularize;

pub use activation::{relu, relu_backward, PReluParams};
pub use batchnorm::{BatchNormCache, BatchNormGrads, BatchStats, BatchNormParams, DEFAULT_BN_EPSILON, DEFAULT_BN_MOMENTUM};
pub use conv::{conv1d_output_len, Conv1dGrads, Conv1dParams};
pub use dense::{DenseGrads, DenseParams};
pub use loss::{one_hot, softmax, softmax_xent};
pub use pool::{MaxPool1d, PoolIndices};
pub use regularize::{dropout, dropout_backward, gaussian_noise, DropoutMask};

use serde::{Deserialize, Serialize};

/// Whether a pass uses batch statistics and stochastic regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}
