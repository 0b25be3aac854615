//! Nearest-neighbor and linear hinge-loss classifiers for the
//! evaluation protocols.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// k-nearest-neighbor prediction under Euclidean distance.
///
/// Distance ties and vote ties resolve to the lowest training-row index.
pub fn knn_predict(train: &DataMatrix, test: &DataMatrix, k: usize) -> Result<Vec<i64>> {
    let labels = train
        .labels()
        .ok_or_else(|| Error::MissingLabels("knn needs labeled training rows".into()))?;
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if train.n_cols() != test.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "train has {} columns, test has {}",
            train.n_cols(),
            test.n_cols()
        )));
    }
    let k = k.min(train.n_rows());

    let mut predictions = Vec::with_capacity(test.n_rows());
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(train.n_rows());
    for ti in 0..test.n_rows() {
        let x = test.row(ti);
        dists.clear();
        for (ri, row) in train.values().rows().into_iter().enumerate() {
            let mut d = 0.0;
            for (a, b) in x.iter().zip(row.iter()) {
                let diff = a - b;
                d += diff * diff;
            }
            dists.push((d, ri));
        }
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));

        let neighbors = &dists[..k];
        let mut counts: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
        for &(_, ri) in neighbors {
            *counts.entry(labels[ri]).or_insert(0) += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        // First neighbor (lowest distance, then lowest row index) whose
        // label attains the top count.
        let winner = neighbors
            .iter()
            .find(|&&(_, ri)| counts[&labels[ri]] == top)
            .map(|&(_, ri)| labels[ri])
            .expect("k >= 1");
        predictions.push(winner);
    }
    Ok(predictions)
}

/// Linear classifier trained by seeded stochastic subgradient descent on
/// the L2-regularized hinge loss (step 1/(reg * t)). The bias rides along
/// as an always-one input coordinate, so it is regularized with the rest
/// of the weight vector.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    weights: Vec<f64>,
    bias: f64,
    neg_label: i64,
    pos_label: i64,
}

impl LinearSvm {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Signed margin of one sample; positive means `pos_label`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (w, v) in self.weights.iter().zip(x.iter()) {
            s += w * v;
        }
        s
    }

    pub fn scores(&self, data: &DataMatrix) -> Vec<f64> {
        data.values()
            .rows()
            .into_iter()
            .map(|row| self.score(row.as_slice().expect("rows are contiguous")))
            .collect()
    }

    pub fn predict(&self, data: &DataMatrix) -> Vec<i64> {
        self.scores(data)
            .into_iter()
            .map(|s| if s > 0.0 { self.pos_label } else { self.neg_label })
            .collect()
    }

    /// The label treated as the positive class (the larger of the two).
    pub fn pos_label(&self) -> i64 {
        self.pos_label
    }
}

pub fn train_linear_svm(
    train: &DataMatrix,
    reg: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearSvm> {
    let labels = train
        .labels()
        .ok_or_else(|| Error::MissingLabels("svm needs labeled training rows".into()))?;
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if !(reg > 0.0) || !reg.is_finite() {
        return Err(Error::InvalidInput(format!("reg must be positive, got {}", reg)));
    }
    let mut distinct: Vec<i64> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "binary labels required, found {} classes",
            distinct.len()
        )));
    }
    let (neg_label, pos_label) = (distinct[0], distinct[1]);

    let n = train.n_rows();
    let d = train.n_cols();
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| if l == pos_label { 1.0 } else { -1.0 })
        .collect();

    // w holds the feature weights plus the bias coordinate at the end.
    let mut w = vec![0.0f64; d + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0usize;
    for _ in 0..epochs {
        for _ in 0..n {
            t += 1;
            let i = rng.random_range(0..n);
            let row = train.row(i);
            let mut margin = w[d]; // bias * 1
            for (ww, v) in w[..d].iter().zip(row.iter()) {
                margin += ww * v;
            }
            margin *= y[i];

            let step = 1.0 / (reg * t as f64);
            let shrink = 1.0 - 1.0 / t as f64; // = 1 - step * reg
            for ww in w.iter_mut() {
                *ww *= shrink;
            }
            if margin < 1.0 {
                for (ww, v) in w[..d].iter_mut().zip(row.iter()) {
                    *ww += step * y[i] * v;
                }
                w[d] += step * y[i];
            }
        }
    }

    let bias = w[d];
    w.truncate(d);
    Ok(LinearSvm { weights: w, bias, neg_label, pos_label })
}
