//! Feature ranking across a source and a target domain.
//!
//! The pipeline matches target samples to source samples with exact
//! transport (so both feature sets are described by the same number of
//! instances), then transports the feature measures of the transposed
//! matrices against each other with the entropic solver. The diagonal of
//! the resulting d x d coupling scores how much mass each feature keeps
//! on itself across domains: unshifted features keep most of their mass,
//! shifted features spread it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::collections::BTreeMap;

use crate::data::{squared_euclidean_cost, zscore, DataMatrix, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::ot::{solve_entropic, solve_exact};

/// How the target samples describing the features are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Row-argmax of the exact transport plan (the default method).
    ExactOt,
    /// Nearest target row in z-score space; linear-time alternative.
    NearestNeighbor,
    /// Uniform sample without replacement; the seeded control baseline.
    Random { seed: u64 },
}

impl SelectionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::ExactOt => "ot",
            SelectionStrategy::NearestNeighbor => "1nn",
            SelectionStrategy::Random { .. } => "random",
        }
    }
}

/// Feature indices sorted by descending diagonal coupling mass, together
/// with the scores themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    order: Vec<usize>,
    diagonal_scores: Vec<f64>,
}

impl FeatureRanking {
    /// Build from per-feature scores; `order` is derived by a stable
    /// descending sort (ties keep the lower feature index first).
    pub fn from_scores(diagonal_scores: Vec<f64>) -> Result<Self> {
        let d = diagonal_scores.len();
        if d == 0 {
            return Err(Error::InvalidInput("no features to rank".into()));
        }
        let bound = 1.0 / d as f64 + 1e-9;
        for (i, &s) in diagonal_scores.iter().enumerate() {
            if !s.is_finite() || s < 0.0 || s > bound {
                return Err(Error::InvalidInput(format!(
                    "diagonal score {} for feature {} outside [0, 1/d]",
                    s, i
                )));
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&x, &y| {
            diagonal_scores[y]
                .partial_cmp(&diagonal_scores[x])
                .expect("scores are finite")
                .then(x.cmp(&y))
        });
        Ok(Self { order, diagonal_scores })
    }

    /// Feature indices, most similar first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Score of feature i (indexed by original feature id).
    pub fn diagonal_scores(&self) -> &[f64] {
        &self.diagonal_scores
    }

    pub fn n_features(&self) -> usize {
        self.diagonal_scores.len()
    }
}

/// Pick one target row per source row (a multiset: the same target row may
/// be picked several times). Rows of the result are exact copies of rows
/// of `t`; z-scoring is only used to decide the matching.
pub fn select_target_samples(
    s: &DataMatrix,
    t: &DataMatrix,
    strategy: SelectionStrategy,
) -> Result<DataMatrix> {
    if s.n_rows() == 0 || t.n_rows() == 0 {
        return Err(Error::InvalidInput("empty source or target".into()));
    }
    if s.n_cols() != t.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} columns, target has {}",
            s.n_cols(),
            t.n_cols()
        )));
    }

    let indices = match strategy {
        SelectionStrategy::ExactOt => {
            if s.n_rows() > t.n_rows() {
                return Err(Error::InvalidInput(format!(
                    "exact transport selection needs N_S <= N_T, got {} > {} \
                     (swap the roles of the inputs)",
                    s.n_rows(),
                    t.n_rows()
                )));
            }
            let zs = zscore(s)?;
            let zt = zscore(t)?;
            let cost = squared_euclidean_cost(&zs, &zt)?;
            let gamma = solve_exact(
                &EmpiricalMeasure::uniform(s.n_rows())?,
                &EmpiricalMeasure::uniform(t.n_rows())?,
                &cost,
            )?;
            // Row argmax, lowest index on ties.
            (0..s.n_rows())
                .map(|i| {
                    let row = gamma.values().row(i);
                    let mut best = 0;
                    for (j, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
        }
        SelectionStrategy::NearestNeighbor => {
            let zs = zscore(s)?;
            let zt = zscore(t)?;
            let cost = squared_euclidean_cost(&zs, &zt)?;
            (0..s.n_rows())
                .map(|i| {
                    let row = cost.values().row(i);
                    let mut best = 0;
                    for (j, &v) in row.iter().enumerate() {
                        if v < row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
        }
        SelectionStrategy::Random { seed } => {
            if s.n_rows() > t.n_rows() {
                return Err(Error::InvalidInput(format!(
                    "cannot draw {} of {} target rows without replacement",
                    s.n_rows(),
                    t.n_rows()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pool: Vec<usize> = (0..t.n_rows()).collect();
            pool.shuffle(&mut rng);
            pool.truncate(s.n_rows());
            pool
        }
    };

    t.select_rows(&indices)
}

/// Subsample at most `per_class` rows per class, uniformly without
/// replacement; classes with fewer rows keep all of them. Output rows are
/// grouped by ascending label and keep their original relative order, so
/// a fixed seed reproduces the result exactly.
pub fn balance_source_by_class(
    s: &DataMatrix,
    per_class: usize,
    seed: u64,
) -> Result<DataMatrix> {
    let labels = s
        .labels()
        .ok_or_else(|| Error::MissingLabels("class balancing needs labeled rows".into()))?;
    if per_class == 0 {
        return Err(Error::InvalidInput("per_class must be at least 1".into()));
    }
    let mut by_class: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for rows in by_class.values() {
        if rows.len() <= per_class {
            keep.extend_from_slice(rows);
        } else {
            let mut pool = rows.clone();
            pool.shuffle(&mut rng);
            pool.truncate(per_class);
            pool.sort_unstable();
            keep.extend_from_slice(&pool);
        }
    }
    s.select_rows(&keep)
}

/// Per-feature ranking options; per-sample normalization of the
/// transposed matrices is the default pipeline behavior.
#[derive(Debug, Clone, Default)]
pub struct RankOptions {
    /// Experimental variant: z-score each feature column across its
    /// samples before transposing, instead of normalizing each sample
    /// across its feature values.
    pub per_feature_normalization: bool,
}

/// Rank features by descending diagonal of the feature-space coupling.
///
/// When the source has more rows than the target the roles are swapped
/// (the larger side is subsampled); feature indices in the result always
/// refer to the shared column indexing of the inputs. Labels on either
/// input are ignored.
pub fn rank_features(
    s: &DataMatrix,
    t: &DataMatrix,
    strategy: SelectionStrategy,
    lambda: f64,
) -> Result<FeatureRanking> {
    rank_features_with(s, t, strategy, lambda, &RankOptions::default())
}

pub fn rank_features_with(
    s: &DataMatrix,
    t: &DataMatrix,
    strategy: SelectionStrategy,
    lambda: f64,
    options: &RankOptions,
) -> Result<FeatureRanking> {
    if s.n_cols() != t.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} columns, target has {}",
            s.n_cols(),
            t.n_cols()
        )));
    }
    let d = s.n_cols();
    if d == 0 {
        return Err(Error::InvalidInput("no features to rank".into()));
    }

    // Swap rule: the side with more samples is the one that gets
    // subsampled; features keep their identity either way.
    let swapped = s.n_rows() > t.n_rows();
    let (sel_from, sel_pool) = if swapped { (t, s) } else { (s, t) };
    let matched = select_target_samples(sel_from, sel_pool, strategy)?;
    let (src_samples, tgt_samples): (&DataMatrix, &DataMatrix) =
        if swapped { (&matched, t) } else { (s, &matched) };

    let (src_feats, tgt_feats) = if options.per_feature_normalization {
        (zscore(src_samples)?.transposed(), zscore(tgt_samples)?.transposed())
    } else {
        // Normalize each sample column of the transposed matrices across
        // its d feature values.
        (zscore(&src_samples.transposed())?, zscore(&tgt_samples.transposed())?)
    };

    let cost = squared_euclidean_cost(&src_feats, &tgt_feats)?;
    let mu = EmpiricalMeasure::uniform(d)?;
    let (gamma, _) = solve_entropic(&mu, &mu, &cost, lambda)?;

    let scores: Vec<f64> = (0..d).map(|i| gamma.values()[[i, i]]).collect();
    FeatureRanking::from_scores(scores)
}

/// Restrict both matrices to the `d_star` best-ranked feature columns, in
/// ranking order; labels are preserved.
pub fn select_top_features(
    s: &DataMatrix,
    t: &DataMatrix,
    ranking: &FeatureRanking,
    d_star: usize,
) -> Result<(DataMatrix, DataMatrix)> {
    if ranking.n_features() != s.n_cols() || ranking.n_features() != t.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "ranking covers {} features but matrices have {} and {} columns",
            ranking.n_features(),
            s.n_cols(),
            t.n_cols()
        )));
    }
    if d_star == 0 || d_star > ranking.n_features() {
        return Err(Error::InvalidInput(format!(
            "d_star must be in [1, {}], got {}",
            ranking.n_features(),
            d_star
        )));
    }
    let cols = &ranking.order()[..d_star];
    Ok((s.select_columns(cols)?, t.select_columns(cols)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn distinct_points() -> DataMatrix {
        DataMatrix::from_rows(&[
            vec![0.0, 1.0],
            vec![2.0, -1.0],
            vec![-3.0, 0.5],
            vec![1.5, 4.0],
            vec![-1.0, -2.0],
        ])
        .unwrap()
    }

    #[test]
    fn self_selection_recovers_source_rows() {
        let s = distinct_points();
        let t_u = select_target_samples(&s, &s, SelectionStrategy::ExactOt).unwrap();
        // Self-matching is the unique optimum, so every row comes back.
        assert_eq!(t_u.values(), s.values());
    }

    #[test]
    fn single_source_row_ties_break_to_first_target() {
        let s = DataMatrix::from_rows(&[vec![0.0]]).unwrap();
        let t = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let t_u = select_target_samples(&s, &t, SelectionStrategy::ExactOt).unwrap();
        // The single coupling row is uniform; lowest index wins.
        assert_eq!(t_u.values()[[0, 0]], 1.0);
    }

    #[test]
    fn nearest_neighbor_in_zscore_space() {
        let s = DataMatrix::from_rows(&[vec![0.0]]).unwrap();
        let t = DataMatrix::from_rows(&[vec![5.0], vec![0.1], vec![-3.0]]).unwrap();
        let t_u = select_target_samples(&s, &t, SelectionStrategy::NearestNeighbor).unwrap();
        assert_eq!(t_u.values()[[0, 0]], 0.1);
    }

    #[test]
    fn random_selection_is_seeded_and_without_replacement() {
        let s = distinct_points();
        let t = DataMatrix::from_rows(&[
            vec![9.0, 9.0],
            vec![8.0, 8.0],
            vec![7.0, 7.0],
            vec![6.0, 6.0],
            vec![5.0, 5.0],
            vec![4.0, 4.0],
        ])
        .unwrap();
        let a = select_target_samples(&s, &t, SelectionStrategy::Random { seed: 42 }).unwrap();
        let b = select_target_samples(&s, &t, SelectionStrategy::Random { seed: 42 }).unwrap();
        assert_eq!(a.values(), b.values());
        // Without replacement: all rows distinct.
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..a.n_rows() {
            assert!(seen.insert(format!("{:?}", a.row(i).to_vec())));
        }
    }

    #[test]
    fn selection_rejects_oversized_source_for_ot() {
        let s = distinct_points();
        let t = DataMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(select_target_samples(&s, &t, SelectionStrategy::ExactOt).is_err());
    }

    #[test]
    fn balance_caps_each_class() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            rows.push(vec![i as f64]);
            labels.push(0);
        }
        for i in 0..30 {
            rows.push(vec![100.0 + i as f64]);
            labels.push(1);
        }
        let values = DataMatrix::from_rows(&rows).unwrap();
        let s = values.with_labels_replaced(labels).unwrap();
        let sub = balance_source_by_class(&s, 20, 7).unwrap();
        assert_eq!(sub.n_rows(), 40);
        let kept = sub.labels().unwrap();
        assert_eq!(kept.iter().filter(|&&l| l == 0).count(), 20);
        assert_eq!(kept.iter().filter(|&&l| l == 1).count(), 20);

        let again = balance_source_by_class(&s, 20, 7).unwrap();
        assert_eq!(sub, again);
    }

    #[test]
    fn balance_returns_everything_when_classes_are_small() {
        let s = DataMatrix::with_labels(array![[1.0], [2.0], [3.0]], vec![0, 1, 0]).unwrap();
        let sub = balance_source_by_class(&s, 10, 3).unwrap();
        assert_eq!(sub.n_rows(), 3);
        // Grouped by label, original order within each class.
        assert_eq!(sub.labels().unwrap(), &[0, 0, 1]);
    }

    #[test]
    fn balance_requires_labels() {
        let s = DataMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(balance_source_by_class(&s, 1, 0).is_err());
    }

    #[test]
    fn single_feature_ranking() {
        let s = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let t = DataMatrix::from_rows(&[vec![1.5], vec![2.5], vec![3.5]]).unwrap();
        let ranking = rank_features(&s, &t, SelectionStrategy::ExactOt, 1.0).unwrap();
        assert_eq!(ranking.order(), &[0]);
        assert!((ranking.diagonal_scores()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shuffled_column_ranks_last() {
        // Target is a copy of the source except feature 2, whose column is
        // replaced by an independent shuffle of itself.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let base = next();
                vec![
                    base * 3.0,
                    next() + if i % 2 == 0 { 2.0 } else { -2.0 },
                    next() * 4.0 - 2.0,
                    next() + base,
                ]
            })
            .collect();
        let s = DataMatrix::from_rows(&rows).unwrap();

        let mut shuffled = rows.clone();
        // Deterministic Fisher-Yates on column 2.
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = ((next() * (i + 1) as f64) as usize).min(i);
            perm.swap(i, j);
        }
        for i in 0..n {
            shuffled[i][2] = rows[perm[i]][2];
        }
        let t = DataMatrix::from_rows(&shuffled).unwrap();

        let ranking = rank_features(&s, &t, SelectionStrategy::ExactOt, 1.0).unwrap();
        assert_eq!(*ranking.order().last().unwrap(), 2);
        let worst = ranking.diagonal_scores()[2];
        for (f, &score) in ranking.diagonal_scores().iter().enumerate() {
            if f != 2 {
                assert!(score > worst, "feature {} scored {} <= {}", f, score, worst);
            }
        }
    }

    #[test]
    fn column_permutation_equivariance() {
        // Features with graded cross-domain noise, so the diagonal scores
        // are well separated and the order is stable.
        let mut state = 0x51a3b2c4d5e6f708u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let noise = [0.05, 0.2, 0.5, 1.0, 2.0];
        let s_rows: Vec<Vec<f64>> =
            (0..25).map(|_| (0..5).map(|_| next() * 4.0 - 2.0).collect()).collect();
        let t_rows: Vec<Vec<f64>> = s_rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(f, &v)| v + noise[f] * (next() - 0.5))
                    .collect()
            })
            .collect();
        let s = DataMatrix::from_rows(&s_rows).unwrap();
        let t = DataMatrix::from_rows(&t_rows).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let sp = s.select_columns(&perm).unwrap();
        let tp = t.select_columns(&perm).unwrap();

        let base = rank_features(&s, &t, SelectionStrategy::ExactOt, 1.0).unwrap();
        let permuted = rank_features(&sp, &tp, SelectionStrategy::ExactOt, 1.0).unwrap();

        // Column j of the permuted data is original feature perm[j], so the
        // permuted order must name positions of the same features.
        let expected: Vec<usize> = base
            .order()
            .iter()
            .map(|&f| perm.iter().position(|&p| p == f).unwrap())
            .collect();
        assert_eq!(permuted.order(), expected.as_slice());
        for j in 0..5 {
            let diff = permuted.diagonal_scores()[j] - base.diagonal_scores()[perm[j]];
            assert!(diff.abs() < 1e-8, "score drift {}", diff);
        }
    }

    #[test]
    fn swap_rule_keeps_feature_indexing() {
        let mut state = 0xdeadbeefcafef00du64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let big: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| next()).collect()).collect();
        let small: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| next()).collect()).collect();
        let s = DataMatrix::from_rows(&big).unwrap();
        let t = DataMatrix::from_rows(&small).unwrap();
        // N_S > N_T triggers the swap; the call must still succeed and
        // rank all 3 features.
        let ranking = rank_features(&s, &t, SelectionStrategy::ExactOt, 1.0).unwrap();
        let mut seen: Vec<usize> = ranking.order().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn top_feature_selection_orders_columns() {
        let s = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let t = DataMatrix::from_rows(&[vec![4.0, 5.0, 6.0]]).unwrap();
        let ranking = FeatureRanking::from_scores(vec![0.1, 0.3, 0.2]).unwrap();
        assert_eq!(ranking.order(), &[1, 2, 0]);

        let (s1, t1) = select_top_features(&s, &t, &ranking, 1).unwrap();
        assert_eq!(s1.values(), &array![[2.0]]);
        assert_eq!(t1.values(), &array![[5.0]]);

        let (s3, _t3) = select_top_features(&s, &t, &ranking, 3).unwrap();
        assert_eq!(s3.values(), &array![[2.0, 3.0, 1.0]]);

        assert!(select_top_features(&s, &t, &ranking, 0).is_err());
        assert!(select_top_features(&s, &t, &ranking, 4).is_err());
    }

    #[test]
    fn ranking_scores_validated() {
        assert!(FeatureRanking::from_scores(vec![]).is_err());
        assert!(FeatureRanking::from_scores(vec![0.9, 0.4]).is_err()); // > 1/d
        assert!(FeatureRanking::from_scores(vec![-0.1, 0.4]).is_err());
    }
}
