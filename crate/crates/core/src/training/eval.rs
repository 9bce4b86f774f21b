use serde::Serialize;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::layers::{one_hot, softmax_xent, Mode};
use crate::model::ModelState;
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

/// Rows per inference batch; bounds memory on large evaluation sets.
pub const INFER_CHUNK: usize = 256;

/// Index of the largest entry of each row; the first wins ties.
pub fn argmax_rows<T: Scalar>(x: &Tensor<T>) -> Vec<usize> {
    let c = x.shape().last().copied().unwrap_or(1).max(1);
    x.data()
        .chunks(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean cross-entropy.
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    pub fn from_predictions(predictions: Vec<usize>, labels: &[usize], classes: usize, loss: f64) -> Self {
        let mut confusion = vec![vec![0; classes]; classes];
        for (&p, &l) in predictions.iter().zip(labels) {
            confusion[l][p] += 1;
        }
        let correct = (0..classes).map(|c| confusion[c][c]).sum::<usize>();
        Evaluation {
            accuracy: correct as f64 / labels.len() as f64,
            loss,
            confusion,
            predictions,
        }
    }
}

/// Inference-mode accuracy, loss and confusion matrix.
pub fn evaluate<T: Scalar>(model: &ModelState<T>, ds: &Dataset) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::Usage("cannot evaluate on an empty dataset".into()));
    }
    let classes = model.config.num_classes;
    if let Some(&bad) = ds.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Validation(format!("label {bad} outside the model's {classes} classes")));
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut predictions = Vec::with_capacity(ds.len());
    let mut loss_sum = 0.0;
    for chunk in idx.chunks(INFER_CHUNK) {
        let x = ds.batch::<T>(chunk);
        let pass = model.forward(&x, Mode::Infer, &mut Rng::new(0))?;
        let labels: Vec<usize> = chunk.iter().map(|&i| ds.labels[i]).collect();
        let (loss, _) = softmax_xent(&pass.logits, &one_hot(&labels, classes)?)?;
        loss_sum += loss.as_f64() * chunk.len() as f64;
        predictions.extend(argmax_rows(&pass.probs));
    }
    Ok(Evaluation::from_predictions(
        predictions,
        &ds.labels,
        classes,
        loss_sum / ds.len() as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synthetic_waveforms;
    use crate::model::ArchConfig;

    #[test]
    fn confusion_consistent_with_accuracy() {
        let ds = synthetic_waveforms(7, 64, 0.1, 2).unwrap();
        let m = ModelState::<f64>::build(ArchConfig::standard(64, 3), &mut Rng::new(3)).unwrap();
        let e = evaluate(&m, &ds).unwrap();
        for (c, row) in e.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), ds.class_counts()[c]);
        }
        let trace: usize = (0..3).map(|c| e.confusion[c][c]).sum();
        assert_eq!(e.accuracy, trace as f64 / ds.len() as f64);
    }

    #[test]
    fn uniform_model_on_balanced_classes() {
        let samples = synthetic_waveforms(4, 32, 0.1, 2).unwrap();
        let mut m = ModelState::<f64>::build(ArchConfig::standard(32, 3), &mut Rng::new(3)).unwrap();
        m.parameters_mut().into_iter().for_each(|t| t.data_mut().iter_mut().for_each(|v| *v = 0.0));
        let e = evaluate(&m, &samples).unwrap();
        // every row ties, so the first class is predicted everywhere
        assert!((e.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!((e.loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_is_usage_error() {
        let ds = Dataset::new(vec![], vec![], vec!["a".into()]).unwrap();
        let m = ModelState::<f64>::build(ArchConfig::standard(32, 3), &mut Rng::new(3)).unwrap();
        assert!(matches!(evaluate(&m, &ds), Err(Error::Usage(_))));
    }

    #[test]
    fn argmax_first_wins_ties() {
        let t = Tensor::from_rows(&[vec![1.0, 3.0, 3.0], vec![2.0, 2.0, 2.0]]).unwrap();
        assert_eq!(argmax_rows(&t), vec![1, 0]);
    }
}
