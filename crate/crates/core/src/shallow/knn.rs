use crate::container::Container;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::{check_dim, matrix_dims};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Majority vote among the `k` nearest rows of `train` (Euclidean).
///
/// Equal distances are ordered by row index. A tied vote goes to the class
/// with the smallest mean distance among its voters, then the smallest label.
pub fn knn_predict(train: &Tensor<f64>, labels: &[usize], query: &[f64], k: usize) -> Result<usize> {
    let (n, d) = matrix_dims(train, "knn")?;
    check_dim(d, query.len(), "knn query")?;
    if labels.len() != n {
        return Err(Error::Shape(format!("knn: {n} rows but {} labels", labels.len())));
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("knn: k must lie in 1..={n}, got {k}")));
    }
    let mut dist: Vec<(f64, usize)> = train.data().chunks(d).map(|r| distance(r, query)).zip(0..).collect();
    dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![(0usize, 0.0f64); classes];
    for &(dd, i) in &dist[..k] {
        votes[labels[i]].0 += 1;
        votes[labels[i]].1 += dd;
    }
    let best = votes
        .iter()
        .enumerate()
        .filter(|(_, v)| v.0 > 0)
        .min_by(|(ca, a), (cb, b)| {
            b.0.cmp(&a.0)
                .then((a.1 / a.0 as f64).total_cmp(&(b.1 / b.0 as f64)))
                .then(ca.cmp(cb))
        })
        .map(|(c, _)| c)
        .expect("k >= 1 votes cast");
    Ok(best)
}

/// Stored training set for k-nearest-neighbour prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub points: Tensor<f64>,
    pub labels: Vec<usize>,
    pub k: usize,
}

impl KnnModel {
    pub const KIND: &'static str = "knn";

    pub fn fit(points: Tensor<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        let (n, _) = matrix_dims(&points, "knn")?;
        if labels.len() != n {
            return Err(Error::Shape(format!("knn: {n} rows but {} labels", labels.len())));
        }
        if k == 0 || k > n {
            return Err(Error::Parameter(format!("knn: k must lie in 1..={n}, got {k}")));
        }
        Ok(KnnModel { points, labels, k })
    }

    pub fn predict(&self, x: &Tensor<f64>) -> Result<Vec<usize>> {
        let (_, d) = matrix_dims(x, "knn")?;
        x.data()
            .chunks(d)
            .map(|q| knn_predict(&self.points, &self.labels, q, self.k))
            .collect()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(Self::KIND, serde_json::json!({ "k": self.k }).to_string());
        c.push("points", &self.points);
        let labels: Vec<f64> = self.labels.iter().map(|&l| l as f64).collect();
        c.push("labels", &Tensor::new(vec![labels.len()], labels).expect("1-d"));
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        let meta: serde_json::Value =
            serde_json::from_str(&c.meta).map_err(|e| Error::Input(format!("knn metadata: {e}")))?;
        let k = meta["k"].as_u64().ok_or_else(|| Error::Input("knn metadata lacks k".into()))? as usize;
        let points = c.take("points")?;
        let labels = c.take::<f64>("labels")?.data().iter().map(|&l| l as usize).collect();
        KnnModel::fit(points, labels, k)
    }
}
