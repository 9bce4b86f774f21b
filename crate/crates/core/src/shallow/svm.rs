use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

use super::{check_dim, matrix_dims};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-3,
            epochs: 200,
            seed: 0,
        }
    }
}

/// One-vs-rest linear SVM.
///
/// Each class scorer `w·x + b` minimizes `λ/2 (‖w‖² + b²) + mean hinge`;
/// the bias is learned as the weight of a constant feature, so it is
/// regularized with the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// `[classes × d]`.
    pub weights: Tensor<f64>,
    pub bias: Vec<f64>,
    pub lambda: f64,
}

/// Pegasos on one binary problem, returning the average of the iterates
/// over the second half of training (bias as the last entry).
fn pegasos(x: &[f64], d: usize, y: &[f64], cfg: &SvmConfig, rng: &mut Rng) -> Vec<f64> {
    let n = y.len();
    let radius = 1.0 / cfg.lambda.sqrt();
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut averaged = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    let start_avg = cfg.epochs / 2;
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let xi = &x[i * d..(i + 1) * d];
            let margin = y[i] * (w[..d].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + w[d]);
            let shrink = 1.0 - eta * cfg.lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += eta * y[i] * xj;
                }
                w[d] += eta * y[i];
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|v| *v *= radius / norm);
            }
            if epoch >= start_avg {
                averaged += 1;
                let r = 1.0 / averaged as f64;
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += (v - *a) * r;
                }
            }
        }
    }
    avg
}

impl SvmModel {
    pub const KIND: &'static str = "svm";

    pub fn fit(x: &Tensor<f64>, labels: &[usize], cfg: &SvmConfig) -> Result<Self> {
        let (n, d) = matrix_dims(x, "svm")?;
        if labels.len() != n {
            return Err(Error::Shape(format!("svm: {n} rows but {} labels", labels.len())));
        }
        if !(cfg.lambda > 0.0) || cfg.epochs == 0 {
            return Err(Error::Parameter("svm needs lambda > 0 and at least one epoch".into()));
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let present = (0..classes).filter(|c| labels.contains(c)).count();
        if present < 2 {
            return Err(Error::Usage("svm needs at least two classes".into()));
        }
        let root = Rng::new(cfg.seed);
        let mut weights = Vec::with_capacity(classes * d);
        let mut bias = Vec::with_capacity(classes);
        for c in 0..classes {
            let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let w = pegasos(x.data(), d, &y, cfg, &mut root.split(c as u64));
            weights.extend_from_slice(&w[..d]);
            bias.push(w[d]);
        }
        let model = SvmModel {
            weights: Tensor::new(vec![classes, d], weights)?,
            bias,
            lambda: cfg.lambda,
        };
        if !model.weights.all_finite() || model.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::numeric("svm", "non-finite weights after training"));
        }
        Ok(model)
    }

    /// Class scores, `[n × classes]`.
    pub fn scores(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (_, d) = matrix_dims(x, "svm")?;
        check_dim(self.weights.shape()[1], d, "svm")?;
        let mut s = x.matmul_nt(&self.weights)?;
        let c = self.bias.len();
        for row in s.data_mut().chunks_mut(c) {
            row.iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
        }
        Ok(s)
    }

    /// Highest-scoring class per row; the lower class id wins exact ties.
    pub fn predict(&self, x: &Tensor<f64>) -> Result<Vec<usize>> {
        let s = self.scores(x)?;
        Ok(s.data()
            .chunks(self.bias.len())
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
                    .0
            })
            .collect())
    }

    /// Sum over classes of the regularized one-vs-rest hinge objective.
    pub fn objective(&self, x: &Tensor<f64>, labels: &[usize]) -> Result<f64> {
        let s = self.scores(x)?;
        let c = self.bias.len();
        let d = self.weights.shape()[1];
        let n = labels.len() as f64;
        let mut total = 0.0;
        for k in 0..c {
            let w = &self.weights.data()[k * d..(k + 1) * d];
            let reg = w.iter().map(|v| v * v).sum::<f64>() + self.bias[k] * self.bias[k];
            let hinge: f64 = s
                .data()
                .chunks(c)
                .zip(labels)
                .map(|(row, &l)| {
                    let y = if l == k { 1.0 } else { -1.0 };
                    (1.0 - y * row[k]).max(0.0)
                })
                .sum();
            total += 0.5 * self.lambda * reg + hinge / n;
        }
        Ok(total)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(Self::KIND, serde_json::json!({ "lambda": self.lambda }).to_string());
        c.push("weights", &self.weights);
        c.push("bias", &Tensor::new(vec![self.bias.len()], self.bias.clone()).expect("1-d"));
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        let meta: serde_json::Value =
            serde_json::from_str(&c.meta).map_err(|e| Error::Input(format!("svm metadata: {e}")))?;
        Ok(SvmModel {
            weights: c.take("weights")?,
            bias: c.take::<f64>("bias")?.into_data(),
            lambda: meta["lambda"].as_f64().ok_or_else(|| Error::Input("svm metadata lacks lambda".into()))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64, n: usize) -> (Tensor<f64>, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let (cx, cy) = if c == 0 { (-2.0, -1.0) } else { (2.0, 1.5) };
            rows.push(vec![cx + 0.4 * rng.standard_normal(), cy + 0.4 * rng.standard_normal()]);
            labels.push(c);
        }
        (Tensor::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(1, 80);
        let m = SvmModel::fit(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn scaling_features_with_matching_lambda_keeps_labels() {
        let (x, y) = blobs(2, 60);
        let mut rng = Rng::new(9);
        let q = Tensor::new(vec![200, 2], (0..400).map(|_| rng.uniform_range(-4.0, 4.0)).collect()).unwrap();
        let cfg = SvmConfig::default();
        let base = SvmModel::fit(&x, &y, &cfg).unwrap();
        let scaled_cfg = SvmConfig {
            lambda: cfg.lambda * 4.0,
            ..cfg
        };
        let scaled = SvmModel::fit(&x.scale(2.0), &y, &scaled_cfg).unwrap();
        let a = base.predict(&q).unwrap();
        let b = scaled.predict(&q.scale(2.0)).unwrap();
        let agree = a.iter().zip(&b).filter(|(u, v)| u == v).count();
        assert!(agree >= 198, "{agree}/200 labels agree");
    }

    #[test]
    fn deterministic_and_serializable() {
        let (x, y) = blobs(3, 30);
        let cfg = SvmConfig { seed: 5, ..Default::default() };
        let m = SvmModel::fit(&x, &y, &cfg).unwrap();
        assert_eq!(m, SvmModel::fit(&x, &y, &cfg).unwrap());
        let back = SvmModel::from_container(Container::from_bytes(&m.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn single_class_rejected() {
        let x = Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(SvmModel::fit(&x, &[0, 0], &SvmConfig::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn averaged_objective_does_not_increase_with_training() {
        let mut rng = Rng::new(4);
        let rows: Vec<Vec<f64>> = (0..90).map(|_| (0..4).map(|_| rng.standard_normal()).collect()).collect();
        let labels: Vec<usize> = rows.iter().map(|r| if r[0] + 0.5 * r[1] > 0.3 { 1 } else { (r[2] > 0.0) as usize * 2 }).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let objectives: Vec<f64> = [20, 80, 320]
            .iter()
            .map(|&epochs| {
                let cfg = SvmConfig { lambda: 1e-2, epochs, seed: 1 };
                SvmModel::fit(&x, &labels, &cfg).unwrap().objective(&x, &labels).unwrap()
            })
            .collect();
        assert!(objectives.windows(2).all(|w| w[1] <= w[0] + 1e-3), "{objectives:?}");
    }
}
