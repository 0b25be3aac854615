//! Synthetic two-domain datasets with a known set of shifted features.
//!
//! Features are class-conditional Gaussians with identical parameters in
//! both domains, except for a planted subset of columns whose target
//! versions are perturbed. Every feature gets a distinct per-class mean
//! profile (a scaled permutation of an equispaced grid), so unshifted
//! features always carry class signal.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// How the planted target columns are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    /// Replace the target column by an independent shuffle of itself:
    /// the marginal is preserved, the per-sample structure is destroyed.
    Shuffle,
    /// Shift the column mean and inflate its variance.
    MeanVariance,
}

#[derive(Debug, Clone)]
pub struct ShiftedDatasetParams {
    pub n_source: usize,
    pub n_target: usize,
    pub n_features: usize,
    pub n_shifted: usize,
    pub n_classes: usize,
    pub shift: ShiftKind,
    /// Scale of the per-class mean grid for each feature.
    pub class_separation: f64,
    /// Standard deviation of the per-(class, feature) mean jitter.
    pub mean_jitter: f64,
    /// Within-class noise standard deviation.
    pub noise_std: f64,
    /// Mean offset applied by [`ShiftKind::MeanVariance`].
    pub mean_shift: f64,
    /// Standard-deviation multiplier applied by [`ShiftKind::MeanVariance`].
    pub variance_scale: f64,
    pub seed: u64,
}

impl ShiftedDatasetParams {
    pub fn new(
        n_source: usize,
        n_target: usize,
        n_features: usize,
        n_shifted: usize,
        n_classes: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_source,
            n_target,
            n_features,
            n_shifted,
            n_classes,
            shift: ShiftKind::Shuffle,
            class_separation: 1.0,
            mean_jitter: 0.25,
            noise_std: 1.0,
            mean_shift: 3.0,
            variance_scale: 2.0,
            seed,
        }
    }
}

/// Generate a (source, target, planted feature set) triple with the
/// default generator parameters.
pub fn generate_shifted_dataset(
    n_source: usize,
    n_target: usize,
    n_features: usize,
    n_shifted: usize,
    n_classes: usize,
    seed: u64,
) -> Result<(DataMatrix, DataMatrix, Vec<usize>)> {
    generate_shifted_dataset_with(&ShiftedDatasetParams::new(
        n_source, n_target, n_features, n_shifted, n_classes, seed,
    ))
}

pub fn generate_shifted_dataset_with(
    params: &ShiftedDatasetParams,
) -> Result<(DataMatrix, DataMatrix, Vec<usize>)> {
    if params.n_source == 0 || params.n_target == 0 {
        return Err(Error::InvalidInput("domains must be non-empty".into()));
    }
    if params.n_features == 0 {
        return Err(Error::InvalidInput("need at least one feature".into()));
    }
    if params.n_shifted > params.n_features {
        return Err(Error::InvalidInput(format!(
            "cannot shift {} of {} features",
            params.n_shifted, params.n_features
        )));
    }
    if params.n_classes == 0 {
        return Err(Error::InvalidInput("need at least one class".into()));
    }
    if !(params.noise_std > 0.0) {
        return Err(Error::InvalidInput("noise_std must be positive".into()));
    }

    let d = params.n_features;
    let c = params.n_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let jitter = Normal::new(0.0, params.mean_jitter.max(f64::MIN_POSITIVE)).unwrap();

    // Per-feature class means: a permuted equispaced grid in
    // [-separation, separation], plus jitter.
    let grid: Vec<f64> = if c == 1 {
        vec![0.0]
    } else {
        (0..c)
            .map(|i| params.class_separation * (2.0 * i as f64 / (c - 1) as f64 - 1.0))
            .collect()
    };
    let mut class_means = vec![vec![0.0f64; d]; c];
    for f in 0..d {
        let mut profile = grid.clone();
        profile.shuffle(&mut rng);
        for (cls, mean) in profile.into_iter().enumerate() {
            class_means[cls][f] = mean + jitter.sample(&mut rng);
        }
    }

    let mut planted: Vec<usize> = (0..d).collect();
    planted.shuffle(&mut rng);
    planted.truncate(params.n_shifted);
    planted.sort_unstable();

    let sample = |n_rows: usize, rng: &mut ChaCha8Rng| -> (Array2<f64>, Vec<i64>) {
        let mut values = Array2::zeros((n_rows, d));
        let mut labels = Vec::with_capacity(n_rows);
        for r in 0..n_rows {
            let cls = r % c;
            labels.push(cls as i64);
            for f in 0..d {
                let noise: f64 = StandardNormal.sample(rng);
                values[[r, f]] = class_means[cls][f] + params.noise_std * noise;
            }
        }
        (values, labels)
    };

    let (source_values, source_labels) = sample(params.n_source, &mut rng);
    let (mut target_values, target_labels) = sample(params.n_target, &mut rng);

    for &f in &planted {
        match params.shift {
            ShiftKind::Shuffle => {
                let mut perm: Vec<usize> = (0..params.n_target).collect();
                perm.shuffle(&mut rng);
                let col: Vec<f64> = (0..params.n_target).map(|r| target_values[[r, f]]).collect();
                for r in 0..params.n_target {
                    target_values[[r, f]] = col[perm[r]];
                }
            }
            ShiftKind::MeanVariance => {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let offset = sign * params.mean_shift * params.noise_std;
                for r in 0..params.n_target {
                    let cls = (r % c) as usize;
                    let center = class_means[cls][f];
                    let v = target_values[[r, f]];
                    target_values[[r, f]] = center + offset + params.variance_scale * (v - center);
                }
            }
        }
    }

    let source = DataMatrix::with_labels(source_values, source_labels)?;
    let target = DataMatrix::with_labels(target_values, target_labels)?;
    Ok((source, target, planted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_is_reproducible() {
        let (s1, t1, p1) = generate_shifted_dataset(30, 40, 6, 2, 3, 99).unwrap();
        let (s2, t2, p2) = generate_shifted_dataset(30, 40, 6, 2, 3, 99).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn zero_shifted_features_allowed() {
        let (s, t, planted) = generate_shifted_dataset(20, 20, 4, 0, 2, 1).unwrap();
        assert!(planted.is_empty());
        assert_eq!(s.n_cols(), 4);
        assert_eq!(t.n_cols(), 4);
    }

    #[test]
    fn all_features_can_shift() {
        let (_, _, planted) = generate_shifted_dataset(20, 25, 5, 5, 2, 3).unwrap();
        assert_eq!(planted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn shapes_and_labels() {
        let (s, t, planted) = generate_shifted_dataset(21, 34, 7, 3, 3, 5).unwrap();
        assert_eq!((s.n_rows(), s.n_cols()), (21, 7));
        assert_eq!((t.n_rows(), t.n_cols()), (34, 7));
        assert_eq!(planted.len(), 3);
        assert!(planted.iter().all(|&f| f < 7));
        let labels = s.labels().unwrap();
        assert!(labels.iter().all(|&l| l < 3));
    }

    #[test]
    fn shuffle_preserves_column_marginal() {
        let params = ShiftedDatasetParams::new(10, 50, 3, 1, 2, 8);
        let (_, t, planted) = generate_shifted_dataset_with(&params).unwrap();
        let f = planted[0];
        // The shuffled column is a permutation, so its sum is what a fresh
        // draw with the same seed stream would have produced; just check
        // it is not constant and stays finite.
        let col: Vec<f64> = (0..50).map(|r| t.values()[[r, f]]).collect();
        assert!(col.iter().any(|&v| v != col[0]));
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(generate_shifted_dataset(0, 10, 3, 1, 2, 0).is_err());
        assert!(generate_shifted_dataset(10, 10, 3, 4, 2, 0).is_err());
        assert!(generate_shifted_dataset(10, 10, 0, 0, 2, 0).is_err());
    }
}
