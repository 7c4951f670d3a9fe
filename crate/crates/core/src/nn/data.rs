use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::model::Matrix;
use crate::error::{Error, Result};
use crate::harness::trial_rng;

/// Labelled 2-D points with a disjoint train/validation split.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub features: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Features and labels of the given rows.
    pub fn subset(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let rows: Vec<[f64; 2]> = idx.iter().map(|&i| self.features[i]).collect();
        (Matrix::from_rows(&rows), idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Two interleaving half circles with isotropic Gaussian noise.
///
/// Class 0 is the upper arc `(cos t, sin t)`, class 1 the lower arc `(1 − cos t, 0.5 − sin t)`,
/// `t` evenly spaced on `[0, π]`. Rows are shuffled and the first 80% (rounded) form the
/// training split.
pub fn make_dataset(n: usize, noise: f64, seed: u64) -> Result<SyntheticDataset> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("dataset needs at least 4 samples, got {n}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise must be non-negative, got {noise}")));
    }
    let mut rng = trial_rng(seed, 0);
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let arc = |k: usize, count: usize| if count > 1 { PI * k as f64 / (count - 1) as f64 } else { 0.0 };

    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n_upper {
        let t = arc(k, n_upper);
        features.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for k in 0..n_lower {
        let t = arc(k, n_lower);
        features.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for p in &mut features {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((0.8 * n as f64).round() as usize).clamp(1, n - 1);
    let validation = order.split_off(n_train);
    Ok(SyntheticDataset {
        features,
        labels,
        train: order,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_split() {
        let d = make_dataset(4, 0.1, 3).unwrap();
        assert_eq!((d.train.len(), d.validation.len()), (3, 1));
        assert_eq!(d.labels.iter().filter(|&&y| y == 0).count(), 2);
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        for n in [4, 5, 17, 400] {
            let d = make_dataset(n, 0.2, 9).unwrap();
            let mut all: Vec<usize> = d.train.iter().chain(&d.validation).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let ones = d.labels.iter().sum::<usize>();
            assert!(ones.abs_diff(n - ones) <= 1);
        }
        let d = make_dataset(400, 0.0, 0).unwrap();
        assert_eq!((d.train.len(), d.validation.len()), (320, 80));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(make_dataset(50, 0.1, 5).unwrap(), make_dataset(50, 0.1, 5).unwrap());
        assert_ne!(make_dataset(50, 0.1, 5).unwrap(), make_dataset(50, 0.1, 6).unwrap());
    }

    #[test]
    fn noiseless_points_lie_on_arcs() {
        let d = make_dataset(40, 0.0, 1).unwrap();
        for (p, &y) in d.features.iter().zip(&d.labels) {
            let centre = if y == 0 { [0.0, 0.0] } else { [1.0, 0.5] };
            assert!(((p[0] - centre[0]).hypot(p[1] - centre[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_tiny_or_bad_input() {
        assert!(make_dataset(3, 0.1, 0).is_err());
        assert!(make_dataset(10, -0.1, 0).is_err());
    }
}
