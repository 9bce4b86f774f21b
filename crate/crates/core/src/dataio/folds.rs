use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::Dataset;

fn indices_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Splits the sample indices into `k` disjoint, covering test folds.
///
/// Each class's indices are shuffled with a stream derived from `seed` and
/// dealt round-robin; the dealing position carries over between classes so
/// fold totals also differ by at most one. Indices within a fold are sorted.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {k}")));
    }
    let by_class = indices_by_class(ds);
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::Folding {
                class: ds.class_names[c].clone(),
                count: idx.len(),
                needed: k,
            });
        }
    }
    let root = Rng::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (c, mut idx) in by_class.into_iter().enumerate() {
        root.split(c as u64).shuffle(&mut idx);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Holds out about `fraction` of every class (at least one sample, never
/// all of them). Returns `(train, held_out)`, each sorted.
pub fn stratified_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let root = Rng::new(seed);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (c, mut idx) in indices_by_class(ds).into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::Folding {
                class: ds.class_names[c].clone(),
                count: idx.len(),
                needed: 2,
            });
        }
        root.split(c as u64).shuffle(&mut idx);
        let n_held = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        held.extend_from_slice(&idx[..n_held]);
        train.extend_from_slice(&idx[n_held..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    Ok((train, held))
}
