//! Classification accuracy and rank-based AUC.

use crate::error::{Error, Result};

/// Fraction of positions where the two label lists agree.
pub fn accuracy(predicted: &[i64], truth: &[i64]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::InvalidInput("empty label lists".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth.iter()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney rank statistic: the
/// probability that a random positive scores above a random negative,
/// counting ties as one half.
///
/// `truth` entries are binary; the larger label is the positive class.
pub fn auc(scores: &[f64], truth: &[i64]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} truths",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let mut classes: Vec<i64> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "auc needs both classes present, found {}",
            classes.len()
        )));
    }
    let pos = classes[1];

    // Average ranks (ties share the mean rank), then the U statistic.
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut ranks = vec![0.0f64; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && scores[idx[end + 1]] == scores[idx[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end+1 share their mean.
        let mean_rank = (start + 1 + end + 1) as f64 / 2.0;
        for &i in &idx[start..=end] {
            ranks[i] = mean_rank;
        }
        start = end + 1;
    }

    let n_pos = truth.iter().filter(|&&t| t == pos).count();
    let n_neg = n - n_pos;
    let rank_sum: f64 = truth
        .iter()
        .zip(ranks.iter())
        .filter(|(&t, _)| t == pos)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
