use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{conv1d_output_len, DEFAULT_BN_EPSILON, DEFAULT_BN_MOMENTUM};

/// One parallel convolution branch: `filters` kernels of `width` taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub filters: usize,
    pub width: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

/// Shape of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub input_length: usize,
    pub branches: Vec<BranchSpec>,
    pub pool: PoolSpec,
    pub fc_units: Vec<usize>,
    pub num_classes: usize,
    pub noise_std: f64,
    pub dropout_rate: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
    pub prelu_per_channel: bool,
}

/// Per-branch lengths derived from an [`ArchConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchLayout {
    /// Length of the convolution output (the Grad-CAM feature map).
    pub conv_len: usize,
    pub pooled_len: usize,
    pub filters: usize,
}

impl BranchLayout {
    pub fn flat_len(&self) -> usize {
        self.filters * self.pooled_len
    }
}

impl ArchConfig {
    /// Three branches `(16, 8, 4)`, `(24, 12, 6)`, `(32, 16, 8)`, max-pooling
    /// 2/2, dense blocks of 512 and 128 units, noise std 0.01, dropout 0.5.
    pub fn standard(input_length: usize, num_classes: usize) -> Self {
        ArchConfig {
            input_length,
            branches: vec![
                BranchSpec { filters: 16, width: 8, stride: 4 },
                BranchSpec { filters: 24, width: 12, stride: 6 },
                BranchSpec { filters: 32, width: 16, stride: 8 },
            ],
            pool: PoolSpec { window: 2, stride: 2 },
            fc_units: vec![512, 128],
            num_classes,
            noise_std: 0.01,
            dropout_rate: 0.5,
            bn_epsilon: DEFAULT_BN_EPSILON,
            bn_momentum: DEFAULT_BN_MOMENTUM,
            prelu_per_channel: false,
        }
    }

    /// Checks every invariant and returns the per-branch layout.
    pub fn layout(&self) -> Result<Vec<BranchLayout>> {
        if self.input_length == 0 {
            return Err(Error::Config("input_length must be >= 1".into()));
        }
        if self.branches.is_empty() {
            return Err(Error::Config("at least one convolution branch is required".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be >= 2, got {}", self.num_classes)));
        }
        if self.pool.window == 0 || self.pool.stride == 0 {
            return Err(Error::Config("pool window and stride must be >= 1".into()));
        }
        if self.fc_units.contains(&0) {
            return Err(Error::Config("fc_units entries must be >= 1".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must lie in [0, 1)".into()));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(Error::Config("bn_epsilon must be > 0".into()));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return Err(Error::Config("bn_momentum must lie in (0, 1]".into()));
        }
        self.branches
            .iter()
            .enumerate()
            .map(|(i, b)| {
                if b.filters == 0 || b.width == 0 || b.stride == 0 {
                    return Err(Error::Config(format!("branch {i}: filters, width and stride must be >= 1")));
                }
                let conv_len = conv1d_output_len(self.input_length, b.width, b.stride).ok_or_else(|| {
                    Error::Config(format!(
                        "branch {i} (width {}) collapses to length 0 on input length {}",
                        b.width, self.input_length
                    ))
                })?;
                let pooled_len = conv1d_output_len(conv_len, self.pool.window, self.pool.stride).ok_or_else(|| {
                    Error::Config(format!(
                        "branch {i} collapses to length 0 after pooling (conv length {conv_len}, window {})",
                        self.pool.window
                    ))
                })?;
                Ok(BranchLayout {
                    conv_len,
                    pooled_len,
                    filters: b.filters,
                })
            })
            .collect()
    }

    /// Width of the merge layer: every flattened branch plus the raw input.
    pub fn merged_len(&self) -> Result<usize> {
        Ok(self.layout()?.iter().map(BranchLayout::flat_len).sum::<usize>() + self.input_length)
    }

    /// Width of the features fed to the classification layer.
    pub fn feature_len(&self) -> Result<usize> {
        match self.fc_units.last() {
            Some(&u) => Ok(u),
            None => self.merged_len(),
        }
    }

    /// Closed-form count of learnable parameters (running statistics excluded).
    pub fn parameter_count(&self) -> Result<usize> {
        self.layout()?;
        // kernels + bias + gamma + beta
        let conv: usize = self.branches.iter().map(|b| b.filters * b.width + 3 * b.filters).sum();
        let mut fan_in = self.merged_len()?;
        let mut fc = 0;
        for &u in &self.fc_units {
            let alpha = if self.prelu_per_channel { u } else { 1 };
            fc += fan_in * u + 3 * u + alpha;
            fan_in = u;
        }
        Ok(conv + fc + fan_in * self.num_classes + self.num_classes)
    }
}
