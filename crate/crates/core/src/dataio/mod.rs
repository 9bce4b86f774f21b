//! Datasets: loading, stratified splits, synthetic waveforms and the
//! canonical on-disk form.

mod canonical;
mod delimited;
mod folds;
mod synth;
mod table;

use serde::{Deserialize, Serialize};

use crate::ccdc::Series;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

pub use canonical::{manifest_path, read_canonical, sha256_hex, write_canonical, Manifest, SourceEntry};
pub use delimited::{load_delimited, load_delimited_split, parse_delimited, Delimiter};
pub use folds::{stratified_folds, stratified_split};
pub use synth::{synthetic_waveforms, Waveform};
pub use table::{load_feature_table, TableMode};

/// Labelled, uniform-length samples.
///
/// Labels are dense class ids `0..num_classes`; `class_names[c]` is the
/// original token for class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Series>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub manifest: Manifest,
}

/// Mapping from an original label token to its dense id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub token: String,
    pub id: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Series>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(first) = samples.first() {
            let len = first.values.len();
            if let Some(bad) = samples.iter().find(|s| s.values.len() != len) {
                return Err(Error::Validation(format!(
                    "sample {:?} has length {}, expected {len}",
                    bad.id,
                    bad.values.len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Dataset {
            samples,
            labels,
            class_names,
            manifest: Manifest::default(),
        })
    }

    /// Builds a dataset from raw label tokens, numbering classes the same way
    /// the file loaders do.
    pub fn from_tokens(samples: Vec<Series>, tokens: &[String]) -> Result<Self> {
        let (labels, names) = delimited::dense_labels(tokens);
        let mut ds = Dataset::new(samples, labels, names)?;
        ds.manifest.labels = ds.label_mapping();
        Ok(ds)
    }

    /// Renumbers labels to follow `class_names` (a training set's class list),
    /// matching tokens by numeric value when both parse as numbers.
    pub fn align_labels(&mut self, class_names: &[String]) -> Result<()> {
        let same = |a: &str, b: &str| match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => x == y,
            _ => a == b,
        };
        let remap = self
            .class_names
            .iter()
            .map(|name| {
                class_names.iter().position(|c| same(c, name)).ok_or_else(|| {
                    Error::Validation(format!("label {name:?} does not occur in the reference classes"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.labels.iter_mut().for_each(|l| *l = remap[*l]);
        self.class_names = class_names.to_vec();
        self.manifest.labels = self.label_mapping();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn series_len(&self) -> usize {
        self.samples.first().map_or(0, |s| s.values.len())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn label_mapping(&self) -> Vec<LabelMapping> {
        self.class_names
            .iter()
            .enumerate()
            .map(|(id, token)| LabelMapping { token: token.clone(), id })
            .collect()
    }

    /// Samples at `indices`, in that order, keeping the class list intact.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            manifest: self.manifest.clone(),
        }
    }

    /// Stacks the samples at `indices` into a `[b × L]` batch.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Tensor<T> {
        let len = self.series_len();
        let data = indices
            .iter()
            .flat_map(|&i| self.samples[i].values.iter().map(|&v| T::cast(v)))
            .collect();
        Tensor::new(vec![indices.len(), len], data).expect("uniform length checked at construction")
    }

    pub fn all<T: Scalar>(&self) -> Tensor<T> {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Removes classes with fewer than `min` samples and renumbers the rest
    /// densely, preserving order. Returns the names of the dropped classes.
    pub fn drop_classes_below(&mut self, min: usize) -> Vec<String> {
        let counts = self.class_counts();
        let mut remap = vec![None; self.num_classes()];
        let mut names = Vec::new();
        let mut dropped = Vec::new();
        for (c, name) in self.class_names.iter().enumerate() {
            if counts[c] >= min {
                remap[c] = Some(names.len());
                names.push(name.clone());
            } else {
                dropped.push(name.clone());
            }
        }
        let (samples, labels) = self
            .samples
            .drain(..)
            .zip(&self.labels)
            .filter_map(|(s, &l)| remap[l].map(|n| (s, n)))
            .unzip();
        self.samples = samples;
        self.labels = labels;
        self.class_names = names;
        dropped
    }

    /// Z-normalizes each sample independently; constant samples become zero.
    pub fn z_normalize_samples(&mut self) {
        for s in &mut self.samples {
            let n = s.values.len() as f64;
            let mean = s.values.iter().sum::<f64>() / n;
            let var = s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for v in &mut s.values {
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(tokens: &[&str]) -> Dataset {
        let samples = (0..tokens.len())
            .map(|i| Series { id: format!("s{i}"), values: vec![i as f64; 3] })
            .collect();
        Dataset::from_tokens(samples, &tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn from_tokens_orders_classes_like_the_loaders() {
        let ds = tiny(&["10", "2", "2.0", "7"]);
        assert_eq!(ds.class_names, vec!["2", "7", "10"]);
        assert_eq!(ds.labels, vec![2, 0, 0, 1]);
        let ds = tiny(&["oak", "birch", "oak"]);
        assert_eq!(ds.class_names, vec!["birch", "oak"]);
        assert_eq!(ds.labels, vec![1, 0, 1]);
    }

    #[test]
    fn align_labels_follows_reference_and_rejects_unknown() {
        let mut test = tiny(&["3", "5.0"]);
        let reference: Vec<String> = ["1", "3", "5"].iter().map(|s| s.to_string()).collect();
        test.align_labels(&reference).unwrap();
        assert_eq!(test.labels, vec![1, 2]);
        assert_eq!(test.class_names, reference);
        let mut other = tiny(&["9"]);
        assert!(matches!(other.align_labels(&reference), Err(Error::Validation(_))));
    }

    fn toy() -> Dataset {
        let samples = (0..6)
            .map(|i| Series {
                id: format!("s{i}"),
                values: vec![i as f64, 1.0, 2.0],
            })
            .collect();
        Dataset::new(samples, vec![0, 1, 2, 0, 1, 0], vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn rejects_inconsistent_construction() {
        let s = |v: Vec<f64>| Series { id: "x".into(), values: v };
        assert!(Dataset::new(vec![s(vec![1.0])], vec![], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![s(vec![1.0]), s(vec![1.0, 2.0])], vec![0, 0], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![s(vec![1.0])], vec![1], vec!["a".into()]).is_err());
    }

    #[test]
    fn drop_classes_renumbers() {
        let mut d = toy();
        assert_eq!(d.drop_classes_below(2), vec!["c".to_string()]);
        assert_eq!(d.labels, vec![0, 1, 0, 1, 0]);
        assert_eq!(d.class_names, vec!["a", "b"]);
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn batch_stacks_rows() {
        let d = toy();
        let b: Tensor<f32> = d.batch(&[2, 0]);
        assert_eq!(b.shape(), &[2, 3]);
        assert_eq!(b.data(), &[2.0, 1.0, 2.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn z_normalize_gives_zero_mean_unit_variance() {
        let mut d = toy();
        d.z_normalize_samples();
        for s in &d.samples {
            let m: f64 = s.values.iter().sum::<f64>() / 3.0;
            let v: f64 = s.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-12 || v == 0.0);
        }
    }
}
