use serde::Serialize;

use crate::dataio::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::numerics::Rng;
use crate::scalar::Scalar;

use super::{evaluate, learning_rate, train_batch, Checkpoint, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's minibatches.
    pub train_loss: f64,
    /// Inference-mode accuracy on the training portion after the epoch.
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Learning rate at the last update of the epoch.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the restored checkpoint.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy,learning_rate\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.learning_rate
            ));
        }
        out
    }
}

/// Splits shuffled indices into batches of `size`; a trailing batch of one
/// sample joins the previous batch because batch statistics need two.
fn minibatches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut batches: Vec<&[usize]> = order.chunks(size).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        batches.pop();
        let start = (batches.len() - 1) * size;
        *batches.last_mut().expect("at least one batch") = &order[start..];
    }
    batches
}

/// Trains on a stratified `1 − val_fraction` share of `ds`, validating on
/// the rest.
pub fn fit<T: Scalar>(model: ModelState<T>, ds: &Dataset, cfg: &TrainConfig) -> Result<(ModelState<T>, History)> {
    cfg.validate()?;
    let (train, val) = stratified_split(ds, cfg.val_fraction, cfg.seed)?;
    fit_with_validation(model, &ds.subset(&train), &ds.subset(&val), cfg)
}

/// Trains with per-epoch shuffled minibatches and early stopping.
///
/// An epoch improves when validation accuracy rises, or stays equal while
/// validation loss falls. Training stops after `patience` consecutive
/// epochs without improvement or at `max_epochs`.
pub fn fit_with_validation<T: Scalar>(
    mut model: ModelState<T>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelState<T>, History)> {
    cfg.validate()?;
    if train.len() < 2 {
        return Err(Error::Usage(format!("training needs at least 2 samples, got {}", train.len())));
    }
    if val.is_empty() {
        return Err(Error::Usage("validation set is empty".into()));
    }
    if train.series_len() != model.config.input_length {
        return Err(Error::Shape(format!(
            "series length {} does not match the model input length {}",
            train.series_len(),
            model.config.input_length
        )));
    }
    let mut rng = Rng::new(cfg.seed).split(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, f64, ModelState<T>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in minibatches(&order, cfg.batch_size) {
            let x = train.batch::<T>(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let (loss, _) = train_batch(&mut model, &x, &labels, cfg, &mut rng)?;
            loss_sum += loss * batch.len() as f64;
        }
        let train_eval = evaluate(&model, train)?;
        let val_eval = evaluate(&model, val)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: train_eval.accuracy,
            val_loss: val_eval.loss,
            val_accuracy: val_eval.accuracy,
            learning_rate: learning_rate(cfg, model.step.saturating_sub(1)),
        };
        log::debug!(
            "epoch {epoch}: loss {:.5} train acc {:.4} val acc {:.4} val loss {:.5}",
            record.train_loss,
            record.train_accuracy,
            record.val_accuracy,
            record.val_loss
        );
        let improved = match &best {
            None => true,
            Some((_, acc, loss, _)) => {
                record.val_accuracy > *acc || (record.val_accuracy == *acc && record.val_loss < *loss)
            }
        };
        epochs.push(record);
        if improved {
            let r = epochs.last().expect("just pushed");
            best = Some((epoch, r.val_accuracy, r.val_loss, model.clone()));
            since_best = 0;
        } else {
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
            since_best += 1;
        }
    }
    let (best_epoch, _, _, best_model) = best.expect("at least one epoch ran");
    let model = match cfg.checkpoint {
        Checkpoint::BestValidation => best_model,
        Checkpoint::Last => model,
    };
    Ok((
        model,
        History {
            epochs,
            best_epoch,
            stopped_early,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synthetic_waveforms;
    use crate::model::ArchConfig;

    fn small_arch(len: usize) -> ArchConfig {
        let mut a = ArchConfig::standard(len, 3);
        a.fc_units = vec![32, 16];
        // few updates per run; the default momentum leaves running stats near their init
        a.bn_momentum = 0.9;
        a
    }

    #[test]
    fn minibatch_merge_rule() {
        let order: Vec<usize> = (0..9).collect();
        let sizes: Vec<usize> = minibatches(&order, 4).iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 5]);
        let sizes: Vec<usize> = minibatches(&order[..8], 4).iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4]);
        let sizes: Vec<usize> = minibatches(&order[..3], 4).iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![3]);
    }

    #[test]
    fn deterministic_history_and_checkpoint_is_max() {
        let ds = synthetic_waveforms(10, 48, 0.05, 4).unwrap();
        let cfg = TrainConfig {
            max_epochs: 8,
            batch_size: 8,
            lr0: 0.02,
            seed: 3,
            ..Default::default()
        };
        let run = || fit(ModelState::<f64>::build(small_arch(48), &mut Rng::new(1)).unwrap(), &ds, &cfg).unwrap();
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        let max = h1.epochs.iter().map(|r| r.val_accuracy).fold(0.0, f64::max);
        assert_eq!(h1.best().val_accuracy, max);
        let (train, val) = stratified_split(&ds, cfg.val_fraction, cfg.seed).unwrap();
        assert_eq!(evaluate(&m1, &ds.subset(&val)).unwrap().accuracy, max);
        assert!(!train.is_empty());
    }

    #[test]
    fn zero_patience_stops_at_first_non_improving_epoch() {
        let ds = synthetic_waveforms(6, 32, 0.3, 5).unwrap();
        let cfg = TrainConfig {
            max_epochs: 60,
            patience: 0,
            batch_size: 4,
            seed: 9,
            ..Default::default()
        };
        let (_, h) = fit(ModelState::<f64>::build(small_arch(32), &mut Rng::new(2)).unwrap(), &ds, &cfg).unwrap();
        let n = h.epochs.len();
        assert!(h.stopped_early);
        assert_eq!(h.best_epoch, n - 2);
        // every epoch before the last improved on its predecessor
        for w in h.epochs[..n - 1].windows(2) {
            assert!(w[1].val_accuracy > w[0].val_accuracy || w[1].val_loss < w[0].val_loss);
        }
    }

    #[test]
    fn learns_synthetic_waveforms_in_f32() {
        let ds = synthetic_waveforms(12, 64, 0.05, 6).unwrap();
        let cfg = TrainConfig {
            max_epochs: 40,
            patience: 40,
            batch_size: 8,
            lr0: 0.02,
            ..Default::default()
        };
        let (m, h) = fit(ModelState::<f32>::build(small_arch(64), &mut Rng::new(4)).unwrap(), &ds, &cfg).unwrap();
        assert!(h.epochs.iter().any(|r| r.train_accuracy == 1.0), "{:?}", h.epochs.last());
        assert!(evaluate(&m, &ds).unwrap().accuracy > 0.9);
    }

    #[test]
    fn class_missing_from_split_rejected() {
        let mut ds = synthetic_waveforms(3, 32, 0.1, 1).unwrap();
        ds.samples.truncate(7);
        ds.labels.truncate(7);
        let m = ModelState::<f64>::build(small_arch(32), &mut Rng::new(1)).unwrap();
        assert!(matches!(fit(m, &ds, &TrainConfig::default()), Err(Error::Folding { .. })));
    }
}
