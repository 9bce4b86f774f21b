use crate::container::Container;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::{check_dim, matrix_dims};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric `d × d` matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order and the matching
/// unit eigenvectors as rows, each signed so its largest-magnitude entry is
/// positive.
pub fn symmetric_eigen(a: &Tensor<f64>) -> Result<(Vec<f64>, Tensor<f64>)> {
    let (d, d2) = a.dims2()?;
    if d != d2 {
        return Err(Error::Shape(format!("eigen-decomposition needs a square matrix, got {d}×{d2}")));
    }
    let mut m = a.data().to_vec();
    let mut v = Tensor::<f64>::identity(d).into_data();
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * d + j] * m[i * d + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p * d + p], m[q * d + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = Vec::with_capacity(d * d);
    for &i in &order {
        let mut col: Vec<f64> = (0..d).map(|k| v[k * d + i]).collect();
        let lead = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.extend(col);
    }
    Ok((values, Tensor::new(vec![d, d], vectors)?))
}

/// Principal components of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `[p × d]`, orthonormal rows in descending eigenvalue order.
    pub components: Tensor<f64>,
    pub eigenvalues: Vec<f64>,
    /// Trace of the sample covariance (sum of all `d` eigenvalues).
    pub total_variance: f64,
}

impl PcaModel {
    pub const KIND: &'static str = "pca";

    /// Fits `p` components from the sample covariance (denominator `n − 1`).
    pub fn fit(x: &Tensor<f64>, p: usize) -> Result<Self> {
        let (n, d) = matrix_dims(x, "pca")?;
        if n < 2 {
            return Err(Error::Parameter("pca needs at least 2 samples".into()));
        }
        if p == 0 || p > n.min(d) {
            return Err(Error::Parameter(format!(
                "pca components must lie in 1..={} for {n} samples of dimension {d}, got {p}",
                n.min(d)
            )));
        }
        let mut mean = vec![0.0; d];
        for row in x.data().chunks(d) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = Tensor::new(
            vec![n, d],
            x.data().chunks(d).flat_map(|r| r.iter().zip(&mean).map(|(v, m)| v - m)).collect(),
        )?;
        let cov = centered.matmul_tn(&centered)?.scale(1.0 / (n - 1) as f64);
        let total_variance = (0..d).map(|i| cov.data()[i * d + i]).sum();
        let (values, vectors) = symmetric_eigen(&cov)?;
        Ok(PcaModel {
            mean,
            components: Tensor::new(vec![p, d], vectors.data()[..p * d].to_vec())?,
            eigenvalues: values[..p].to_vec(),
            total_variance,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        let s = self.components.shape();
        (s[0], s[1])
    }

    /// Projects rows of `x` (`[n × d]`) onto the components (`[n × p]`).
    pub fn transform(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let (n, d) = matrix_dims(x, "pca transform")?;
        check_dim(self.mean.len(), d, "pca transform")?;
        let centered = Tensor::new(
            vec![n, d],
            x.data().chunks(d).flat_map(|r| r.iter().zip(&self.mean).map(|(v, m)| v - m)).collect(),
        )?;
        centered.matmul_nt(&self.components)
    }

    pub fn transform_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.transform(&Tensor::new(vec![1, x.len()], x.to_vec())?)?.into_data())
    }

    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({ "total_variance": self.total_variance }).to_string();
        let mut c = Container::new(Self::KIND, meta);
        c.push("mean", &Tensor::new(vec![self.mean.len()], self.mean.clone()).expect("1-d"));
        c.push("components", &self.components);
        c.push("eigenvalues", &Tensor::new(vec![self.eigenvalues.len()], self.eigenvalues.clone()).expect("1-d"));
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        let meta: serde_json::Value =
            serde_json::from_str(&c.meta).map_err(|e| Error::Input(format!("pca metadata: {e}")))?;
        Ok(PcaModel {
            mean: c.take::<f64>("mean")?.into_data(),
            components: c.take("components")?,
            eigenvalues: c.take::<f64>("eigenvalues")?.into_data(),
            total_variance: meta["total_variance"].as_f64().unwrap_or(f64::NAN),
        })
    }
}
