//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use leafnet::{Rng, Tensor};

pub const FD_STEP: f64 = 1e-5;
/// Below this magnitude gradients are compared absolutely. Central
/// differences of an O(1) loss carry roughly 1e-10 of rounding noise, which
/// is all they measure where the true gradient is zero (a bias feeding a
/// train-mode batch norm, for one).
pub const FD_DENOM_FLOOR: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_DENOM_FLOOR)
}

/// All coordinates when there are at most `max`, otherwise `max` distinct ones.
pub fn sample_coords(len: usize, max: usize, rng: &mut Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..len).collect();
    if len > max {
        rng.shuffle(&mut all);
        all.truncate(max);
    }
    all
}

pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    /// Worst relative error over the smooth coordinates.
    pub worst: f64,
    pub checked: usize,
    /// Coordinates whose step straddled a ReLU or max-pool kink.
    pub kinks: usize,
}

impl FdReport {
    pub fn merge(self, other: FdReport) -> FdReport {
        FdReport {
            worst: self.worst.max(other.worst),
            checked: self.checked + other.checked,
            kinks: self.kinks + other.kinks,
        }
    }
}

/// Compares `analytic` with central differences of `f` at `coords` of `x`.
///
/// A coordinate counts as a kink, and is left out of `worst`, only when the
/// two one-sided differences disagree and the analytic value matches one of
/// them; a wrong gradient cannot pass that test.
pub fn fd_check(
    analytic: &Tensor<f64>,
    x: &Tensor<f64>,
    coords: &[usize],
    mut f: impl FnMut(&Tensor<f64>) -> f64,
) -> FdReport {
    assert_eq!(analytic.shape(), x.shape(), "gradient shape differs from its variable");
    let mut probe = x.clone();
    let mut report = FdReport::default();
    for &i in coords {
        let base = probe.data()[i];
        probe.data_mut()[i] = base + FD_STEP;
        let up = f(&probe);
        probe.data_mut()[i] = base - FD_STEP;
        let down = f(&probe);
        probe.data_mut()[i] = base;
        let a = analytic.data()[i];
        let err = rel_err(a, (up - down) / (2.0 * FD_STEP));
        if err > FD_TOLERANCE {
            let mid = f(&probe);
            let (fwd, bwd) = ((up - mid) / FD_STEP, (mid - down) / FD_STEP);
            if rel_err(fwd, bwd) > 10.0 * FD_TOLERANCE && rel_err(a, fwd).min(rel_err(a, bwd)) <= FD_TOLERANCE {
                report.kinks += 1;
                continue;
            }
        }
        report.checked += 1;
        report.worst = report.worst.max(err);
    }
    report
}

pub fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Lloyd's algorithm on 2-D points with farthest-point seeding.
pub fn k_means_2d(points: &[f64], k: usize) -> Vec<usize> {
    let n = points.len() / 2;
    let dist = |a: usize, c: &[f64; 2]| (points[2 * a] - c[0]).powi(2) + (points[2 * a + 1] - c[1]).powi(2);
    let mut centers = vec![[points[0], points[1]]];
    while centers.len() < k {
        let nearest = |a: usize| centers.iter().map(|c| dist(a, c)).fold(f64::INFINITY, f64::min);
        let far = (0..n).max_by(|&a, &b| nearest(a).total_cmp(&nearest(b))).unwrap();
        centers.push([points[2 * far], points[2 * far + 1]]);
    }
    let mut assign = vec![0; n];
    for _ in 0..100 {
        for (i, a) in assign.iter_mut().enumerate() {
            *a = (0..k).min_by(|&p, &q| dist(i, &centers[p]).total_cmp(&dist(i, &centers[q]))).unwrap();
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
            if !members.is_empty() {
                let m = members.len() as f64;
                center[0] = members.iter().map(|&i| points[2 * i]).sum::<f64>() / m;
                center[1] = members.iter().map(|&i| points[2 * i + 1]).sum::<f64>() / m;
            }
        }
    }
    assign
}

/// Fraction of points whose cluster's majority label matches their own.
pub fn purity(assign: &[usize], labels: &[usize]) -> f64 {
    let clusters = assign.iter().max().map_or(0, |m| m + 1);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut total = 0;
    for c in 0..clusters {
        let mut counts = vec![0; classes];
        for (a, l) in assign.iter().zip(labels) {
            if *a == c {
                counts[*l] += 1;
            }
        }
        total += counts.iter().max().unwrap();
    }
    total as f64 / labels.len() as f64
}

/// `per` points around each of `k` random centers in `dim` dimensions.
pub fn gaussian_clusters(seed: u64, k: usize, per: usize, dim: usize) -> (Tensor<f64>, Vec<usize>) {
    let mut rng = Rng::new(seed);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| 10.0 * rng.standard_normal()).collect())
        .collect();
    let mut data = Vec::with_capacity(k * per * dim);
    let mut labels = Vec::with_capacity(k * per);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            data.extend(center.iter().map(|m| m + rng.standard_normal()));
            labels.push(c);
        }
    }
    (Tensor::new(vec![k * per, dim], data).unwrap(), labels)
}

/// Share of rows whose nearest other row (Euclidean) carries the same label.
pub fn nearest_neighbor_agreement(points: &[f64], dim: usize, labels: &[usize]) -> f64 {
    let n = labels.len();
    let d2 = |a: usize, b: usize| -> f64 {
        (0..dim).map(|k| (points[a * dim + k] - points[b * dim + k]).powi(2)).sum()
    };
    let hits = (0..n)
        .filter(|&i| {
            let j = (0..n).filter(|&j| j != i).min_by(|&a, &b| d2(i, a).total_cmp(&d2(i, b))).unwrap();
            labels[j] == labels[i]
        })
        .count();
    hits as f64 / n as f64
}
