use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Factor applied to `P` during the first `.1` iterations.
    pub early_exaggeration: (f64, usize),
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: (12.0, 250),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsneResult {
    /// `[n × 2]`.
    pub embedding: Tensor<f64>,
    /// Achieved perplexity of each point's conditional distribution.
    pub perplexities: Vec<f64>,
    /// `(iteration, KL(P‖Q))`, sampled every 10 iterations, at the end of
    /// early exaggeration and after the last iteration.
    pub kl_trace: Vec<(usize, f64)>,
}

impl TsneResult {
    /// `id,x,y,label` rows.
    pub fn to_csv(&self, ids: &[String], labels: &[usize]) -> String {
        let mut out = String::from("id,x,y,label\n");
        for (i, row) in self.embedding.data().chunks(2).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", ids[i], row[0], row[1], labels[i]));
        }
        out
    }
}

const SEARCH_TOL: f64 = 1e-5;
const SEARCH_MAX: usize = 200;
const P_FLOOR: f64 = 1e-12;
const MOMENTUM: (f64, f64) = (0.5, 0.8);
const MOMENTUM_SWITCH: usize = 250;
const INIT_STD: f64 = 1e-2;
const MIN_GAIN: f64 = 0.01;

/// Row `i` of the conditional affinities for precision `beta`; returns the
/// row and its entropy in bits.
fn conditional_row(d2: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let n = row.len();
    let min = (0..n).filter(|&j| j != i).map(|j| d2[j]).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        row[j] = if j == i { 0.0 } else { (-(d2[j] - min) * beta).exp() };
        sum += row[j];
    }
    let mut h = 0.0;
    for j in 0..n {
        row[j] /= sum;
        if row[j] > 0.0 {
            h -= row[j] * row[j].log2();
        }
    }
    h
}

/// Binary search on each point's Gaussian precision so its conditional
/// distribution has the target perplexity.
fn affinities(d2: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.log2();
    let mut p = vec![0.0; n * n];
    let mut achieved = Vec::with_capacity(n);
    for i in 0..n {
        let di = &d2[i * n..(i + 1) * n];
        let row = &mut p[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let mut h = conditional_row(di, i, beta, row);
        for _ in 0..SEARCH_MAX {
            if (h - target).abs() < SEARCH_TOL {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = conditional_row(di, i, beta, row);
        }
        achieved.push(h.exp2());
    }
    (p, achieved)
}

fn kl_divergence(p: &[f64], q_num: &[f64], q_sum: f64) -> f64 {
    p.iter()
        .zip(q_num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &num)| pij * (pij / (num / q_sum).max(P_FLOOR)).ln())
        .sum()
}

/// Exact t-SNE embedding of `features` (`[n × d]`) into two dimensions.
pub fn tsne(features: &Tensor<f64>, cfg: &TsneConfig) -> Result<TsneResult> {
    let (n, d) = features.dims2()?;
    if n < 5 {
        return Err(Error::Parameter(format!("t-SNE needs at least 5 points, got {n}")));
    }
    if !(cfg.perplexity > 1.0 && cfg.perplexity < n as f64) {
        return Err(Error::Parameter(format!(
            "perplexity must lie in (1, {n}) for {n} points, got {}",
            cfg.perplexity
        )));
    }
    if cfg.iterations == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Parameter("t-SNE needs at least one iteration and a positive learning rate".into()));
    }
    let x = features.data();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i * d..(i + 1) * d].iter().zip(&x[j * d..(j + 1) * d]).map(|(a, b)| (a - b) * (a - b)).sum();
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }
    let (cond, perplexities) = affinities(&d2, n, cfg.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }

    let mut rng = Rng::new(cfg.seed);
    let mut y: Vec<f64> = (0..2 * n).map(|_| INIT_STD * rng.standard_normal()).collect();
    let mut velocity = vec![0.0; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![0.0; 2 * n];
    let (exaggeration, exaggerate_for) = cfg.early_exaggeration;
    let mut kl_trace = Vec::new();
    for it in 0..cfg.iterations {
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                q_sum += 2.0 * v;
            }
        }
        let scale = if it < exaggerate_for { exaggeration } else { 1.0 };
        if it % 10 == 0 || it == exaggerate_for {
            kl_trace.push((it, kl_divergence(&p, &num, q_sum)));
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let m = (scale * p[i * n + j] - nij / q_sum) * nij;
                grad[2 * i] += 4.0 * m * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += 4.0 * m * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        let momentum = if it < MOMENTUM_SWITCH { MOMENTUM.0 } else { MOMENTUM.1 };
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (velocity[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(MIN_GAIN)
            };
            velocity[k] = momentum * velocity[k] - cfg.learning_rate * gains[k] * grad[k];
            y[k] += velocity[k];
        }
        for c in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + c] -= mean);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("tsne", format!("embedding diverged at iteration {it}")));
        }
    }
    let mut q_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (dx, dy) = (y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
                num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
                q_sum += num[i * n + j];
            }
        }
    }
    kl_trace.push((cfg.iterations, kl_divergence(&p, &num, q_sum)));
    Ok(TsneResult {
        embedding: Tensor::new(vec![n, 2], y)?,
        perplexities,
        kl_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters(seed: u64, per: usize, dim: usize) -> (Tensor<f64>, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            let center: Vec<f64> = (0..dim).map(|_| 10.0 * rng.standard_normal()).collect();
            for _ in 0..per {
                rows.push(center.iter().map(|m| m + rng.standard_normal()).collect());
                labels.push(c);
            }
        }
        (Tensor::from_rows(&rows).unwrap(), labels)
    }

    /// Lloyd's 3-means seeded with the farthest-point rule from point 0.
    fn three_means(y: &[f64], n: usize) -> Vec<usize> {
        let dist = |a: usize, c: &[f64; 2]| (y[2 * a] - c[0]).powi(2) + (y[2 * a + 1] - c[1]).powi(2);
        let mut centers = vec![[y[0], y[1]]];
        while centers.len() < 3 {
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = centers.iter().map(|c| dist(a, c)).fold(f64::INFINITY, f64::min);
                    let db = centers.iter().map(|c| dist(b, c)).fold(f64::INFINITY, f64::min);
                    da.total_cmp(&db)
                })
                .unwrap();
            centers.push([y[2 * far], y[2 * far + 1]]);
        }
        let mut assign = vec![0; n];
        for _ in 0..100 {
            for (i, a) in assign.iter_mut().enumerate() {
                *a = (0..3).min_by(|&p, &q| dist(i, &centers[p]).total_cmp(&dist(i, &centers[q]))).unwrap();
            }
            for (k, c) in centers.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| assign[i] == k).collect();
                if !members.is_empty() {
                    c[0] = members.iter().map(|&i| y[2 * i]).sum::<f64>() / members.len() as f64;
                    c[1] = members.iter().map(|&i| y[2 * i + 1]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        assign
    }

    fn purity(assign: &[usize], labels: &[usize]) -> f64 {
        let mut total = 0;
        for k in 0..3 {
            let mut counts = [0; 3];
            for (a, l) in assign.iter().zip(labels) {
                if *a == k {
                    counts[*l] += 1;
                }
            }
            total += counts.iter().max().unwrap();
        }
        total as f64 / labels.len() as f64
    }

    #[test]
    fn separates_gaussian_clusters() {
        let (x, labels) = clusters(1, 30, 50);
        let cfg = TsneConfig {
            perplexity: 10.0,
            iterations: 500,
            ..Default::default()
        };
        let r = tsne(&x, &cfg).unwrap();
        assert_eq!(r.embedding.shape(), &[90, 2]);
        assert!(r.embedding.all_finite());
        for &p in &r.perplexities {
            assert!((p.log2() - 10f64.log2()).abs() < 1e-3);
        }
        assert!(purity(&three_means(r.embedding.data(), 90), &labels) >= 0.95);
        let at_end = r.kl_trace.iter().find(|(it, _)| *it == 250).unwrap().1;
        assert!(r.kl_trace.last().unwrap().1 <= at_end);
    }

    #[test]
    fn duplicates_and_determinism() {
        let mut rows = vec![vec![0.0, 0.0]; 4];
        rows.extend((0..6).map(|i| vec![i as f64, 1.0]));
        let x = Tensor::from_rows(&rows).unwrap();
        let cfg = TsneConfig {
            perplexity: 3.0,
            iterations: 100,
            ..Default::default()
        };
        let a = tsne(&x, &cfg).unwrap();
        assert!(a.embedding.all_finite());
        assert_eq!(a, tsne(&x, &cfg).unwrap());
    }

    #[test]
    fn perplexity_bounds() {
        let x = Tensor::from_rows(&(0..6).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        for perp in [6.0, 1.0, 10.0] {
            let cfg = TsneConfig { perplexity: perp, ..Default::default() };
            assert!(matches!(tsne(&x, &cfg), Err(Error::Parameter(_))));
        }
        let few = Tensor::from_rows(&(0..4).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        assert!(tsne(&few, &TsneConfig { perplexity: 2.0, ..Default::default() }).is_err());
    }
}
