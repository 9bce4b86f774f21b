//! Optimization, evaluation and cross-validation.

mod crossval;
mod eval;
mod fit;
mod sgd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crossval::{crossval, CrossvalConfig, FoldReport, Pipeline};
pub use eval::{argmax_rows, evaluate, Evaluation, INFER_CHUNK};
pub use fit::{fit, fit_with_validation, EpochRecord, History};
pub use sgd::{learning_rate, sgd_step, train_batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoint {
    /// Restore the weights of the epoch with the best validation result.
    BestValidation,
    /// Keep the weights of the last epoch run.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    /// Learning rate after `t` updates is `lr0 / (1 + decay·t)`.
    pub decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub checkpoint: Checkpoint,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr0: 0.005,
            decay: 1e-6,
            max_epochs: 1000,
            patience: 50,
            val_fraction: 0.2,
            seed: 0,
            checkpoint: Checkpoint::BestValidation,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be at least 2 for batch statistics, got {}",
                self.batch_size
            )));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::Config(format!("decay must be non-negative, got {}", self.decay)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}
