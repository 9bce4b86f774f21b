use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::model::{ArchConfig, ModelState};
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;
use crate::shallow::{KnnModel, PcaModel, Standardizer, SvmConfig, SvmModel};

use super::{evaluate, fit, Evaluation, TrainConfig};

/// Classifier applied on top of (or as) the trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pipeline {
    /// The network's own softmax output.
    Net,
    /// k-nearest neighbours on frozen features.
    NetKnn { k: usize },
    /// Linear SVM on the leading principal components of frozen features.
    NetPcaSvm { components: usize, svm: SvmConfig },
}

impl Pipeline {
    pub fn knn() -> Self {
        Pipeline::NetKnn { k: 3 }
    }

    pub fn pca_svm() -> Self {
        Pipeline::NetPcaSvm {
            components: 25,
            svm: SvmConfig::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Net => "net",
            Pipeline::NetKnn { .. } => "net+knn",
            Pipeline::NetPcaSvm { .. } => "net+pca+svm",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "net" => Ok(Pipeline::Net),
            "net+knn" => Ok(Pipeline::knn()),
            "net+pca+svm" => Ok(Pipeline::pca_svm()),
            other => Err(Error::Config(format!(
                "unknown pipeline {other:?}; expected net, net+knn or net+pca+svm"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossvalConfig {
    pub k: usize,
    /// Seed for fold assignment; fold `i` trains with `train.seed` split by `i`.
    pub seed: u64,
    pub pipelines: Vec<Pipeline>,
    /// Z-score features on the training fold before kNN, PCA and SVM.
    pub standardize: bool,
    pub parallel: bool,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            k: 10,
            seed: 0,
            pipelines: vec![Pipeline::Net],
            standardize: true,
            parallel: true,
        }
    }
}

/// Accuracy summary of one pipeline across folds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub pipeline: String,
    pub per_fold_accuracy: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub best: f64,
    pub worst: f64,
    pub confusion: Vec<Vec<Vec<usize>>>,
}

impl FoldReport {
    pub fn new(pipeline: impl Into<String>, evals: &[Evaluation]) -> Self {
        let acc: Vec<f64> = evals.iter().map(|e| e.accuracy).collect();
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        let std = (acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
        FoldReport {
            pipeline: pipeline.into(),
            mean,
            std,
            best: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            worst: acc.iter().copied().fold(f64::INFINITY, f64::min),
            per_fold_accuracy: acc,
            confusion: evals.iter().map(|e| e.confusion.clone()).collect(),
        }
    }

    /// `fold,accuracy` rows followed by summary rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,accuracy\n");
        for (i, a) in self.per_fold_accuracy.iter().enumerate() {
            out.push_str(&format!("{i},{a}\n"));
        }
        for (name, v) in [("mean", self.mean), ("std", self.std), ("best", self.best), ("worst", self.worst)] {
            out.push_str(&format!("{name},{v}\n"));
        }
        out
    }
}

fn features<T: Scalar>(model: &ModelState<T>, ds: &Dataset) -> Result<Tensor<f64>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut rows = Vec::with_capacity(ds.len() * model.config.feature_len()?);
    for chunk in idx.chunks(super::INFER_CHUNK) {
        rows.extend(model.extract_features(&ds.batch::<T>(chunk))?.cast::<f64>().into_data());
    }
    Tensor::new(vec![ds.len(), model.config.feature_len()?], rows)
}

/// Fits each downstream pipeline on the training-fold features of a frozen
/// network and scores it on the test fold.
fn score_pipelines<T: Scalar>(
    model: &ModelState<T>,
    train: &Dataset,
    test: &Dataset,
    cfg: &CrossvalConfig,
) -> Result<Vec<Evaluation>> {
    let classes = model.config.num_classes;
    let needs_features = cfg.pipelines.iter().any(|p| *p != Pipeline::Net);
    let frozen = if needs_features {
        let (a, b) = (features(model, train)?, features(model, test)?);
        Some(if cfg.standardize {
            let s = Standardizer::fit(&a)?;
            (s.transform(&a)?, s.transform(&b)?)
        } else {
            (a, b)
        })
    } else {
        None
    };
    cfg.pipelines
        .iter()
        .map(|p| match (p, &frozen) {
            (Pipeline::Net, _) => evaluate(model, test),
            (_, None) => unreachable!("features extracted for every downstream pipeline"),
            (Pipeline::NetKnn { k }, Some((ftrain, ftest))) => {
                let knn = KnnModel::fit(ftrain.clone(), train.labels.clone(), *k)?;
                Ok(Evaluation::from_predictions(knn.predict(ftest)?, &test.labels, classes, f64::NAN))
            }
            (Pipeline::NetPcaSvm { components, svm }, Some((ftrain, ftest))) => {
                let (n, d) = ftrain.dims2()?;
                let pca = PcaModel::fit(ftrain, (*components).min(n).min(d))?;
                let svm = SvmModel::fit(&pca.transform(ftrain)?, &train.labels, svm)?;
                let pred = svm.predict(&pca.transform(ftest)?)?;
                Ok(Evaluation::from_predictions(pred, &test.labels, classes, f64::NAN))
            }
        })
        .collect()
}

/// Stratified k-fold cross-validation. Each fold trains a fresh network
/// (initialized from `init_seed` split by fold) on the other folds, with
/// its own internal validation split, then scores every pipeline on the
/// held-out fold. Returns one report per pipeline, in `cfg.pipelines` order.
pub fn crossval<T: Scalar>(
    ds: &Dataset,
    arch: &ArchConfig,
    train_cfg: &TrainConfig,
    cfg: &CrossvalConfig,
    init_seed: u64,
) -> Result<Vec<FoldReport>> {
    if cfg.pipelines.is_empty() {
        return Err(Error::Config("no pipelines requested".into()));
    }
    train_cfg.validate()?;
    let folds = stratified_folds(ds, cfg.k, cfg.seed)?;
    let run_fold = |(i, test_idx): (usize, &Vec<usize>)| -> Result<Vec<Evaluation>> {
        let mut in_test = vec![false; ds.len()];
        test_idx.iter().for_each(|&j| in_test[j] = true);
        let train_idx: Vec<usize> = (0..ds.len()).filter(|&j| !in_test[j]).collect();
        let (train, test) = (ds.subset(&train_idx), ds.subset(test_idx));
        let model = ModelState::<T>::build(arch.clone(), &mut Rng::new(init_seed).split(i as u64))?;
        let fold_cfg = TrainConfig {
            seed: Rng::new(train_cfg.seed).split(i as u64).next_u64(),
            ..train_cfg.clone()
        };
        let (model, history) = fit(model, &train, &fold_cfg)?;
        let evals = score_pipelines(&model, &train, &test, cfg)?;
        log::info!(
            "fold {i}: {} epochs, {}",
            history.epochs.len(),
            cfg.pipelines
                .iter()
                .zip(&evals)
                .map(|(p, e)| format!("{} {:.4}", p.name(), e.accuracy))
                .collect::<Vec<_>>()
                .join(", ")
        );
        Ok(evals)
    };
    let per_fold: Vec<Vec<Evaluation>> = if cfg.parallel {
        folds.par_iter().enumerate().map(run_fold).collect::<Result<_>>()?
    } else {
        folds.iter().enumerate().map(run_fold).collect::<Result<_>>()?
    };
    Ok(cfg
        .pipelines
        .iter()
        .enumerate()
        .map(|(p, pipe)| {
            let evals: Vec<Evaluation> = per_fold.iter().map(|f| f[p].clone()).collect();
            FoldReport::new(pipe.name(), &evals)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synthetic_waveforms;

    #[test]
    fn report_statistics_consistent() {
        let evals: Vec<Evaluation> = [0.5, 1.0, 0.75]
            .iter()
            .map(|&a| Evaluation {
                accuracy: a,
                loss: 0.0,
                confusion: vec![],
                predictions: vec![],
            })
            .collect();
        let r = FoldReport::new("net", &evals);
        assert_eq!(r.mean, 0.75);
        assert!((r.std - (0.125f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((r.best, r.worst), (1.0, 0.5));
        assert!(r.to_csv().contains("mean,0.75\n"));
    }

    #[test]
    fn pipeline_names_round_trip() {
        for p in [Pipeline::Net, Pipeline::knn(), Pipeline::pca_svm()] {
            assert_eq!(Pipeline::parse(p.name()).unwrap(), p);
        }
        assert!(Pipeline::parse("svm").is_err());
    }

    #[test]
    fn three_pipelines_on_synthetic_parallel_equals_serial() {
        let ds = synthetic_waveforms(9, 32, 0.05, 1).unwrap();
        let mut arch = ArchConfig::standard(32, 3);
        arch.fc_units = vec![16, 8];
        let train = TrainConfig {
            max_epochs: 6,
            batch_size: 6,
            lr0: 0.02,
            ..Default::default()
        };
        let mut cfg = CrossvalConfig {
            k: 3,
            pipelines: vec![
                Pipeline::Net,
                Pipeline::knn(),
                Pipeline::NetPcaSvm {
                    components: 5,
                    svm: SvmConfig::default(),
                },
            ],
            ..Default::default()
        };
        let par = crossval::<f64>(&ds, &arch, &train, &cfg, 7).unwrap();
        cfg.parallel = false;
        let ser = crossval::<f64>(&ds, &arch, &train, &cfg, 7).unwrap();
        assert_eq!(par, ser);
        assert_eq!(par.len(), 3);
        for r in &par {
            assert_eq!(r.per_fold_accuracy.len(), 3);
            let total: usize = r.confusion.iter().flatten().flatten().sum();
            assert_eq!(total, ds.len());
        }
    }

    #[test]
    fn folding_error_names_class() {
        let ds = synthetic_waveforms(4, 32, 0.05, 1).unwrap();
        let cfg = CrossvalConfig { k: 5, ..Default::default() };
        match crossval::<f64>(&ds, &ArchConfig::standard(32, 3), &TrainConfig::default(), &cfg, 0) {
            Err(Error::Folding { class, .. }) => assert_eq!(class, "sine"),
            r => panic!("{r:?}"),
        }
    }
}
