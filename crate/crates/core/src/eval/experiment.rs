//! The domain-adaptation evaluation protocol: repeated class-balanced
//! subsampling, feature ranking, truncation to a growing feature budget,
//! optional transport-based adaptation, classification, scoring.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{squared_euclidean_cost, DataMatrix, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::eval::classify::{knn_predict, train_linear_svm};
use crate::eval::metrics::{accuracy, auc};
use crate::featsel::{balance_source_by_class, rank_features, SelectionStrategy};
use crate::mapping::barycentric_map;
use crate::ot::solve_class_regularized;

/// Entropy weight for the class-regularized adaptation arm.
pub const OT3_LAMBDA: f64 = 2.0;
/// Group-penalty weight for the class-regularized adaptation arm.
pub const OT3_ETA: f64 = 1.0;
/// Regularization of the stochastic-subgradient linear classifier.
pub const SVM_REG: f64 = 1e-4;
/// Training epochs of the stochastic-subgradient linear classifier.
pub const SVM_EPOCHS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adaptation {
    None,
    /// Class-regularized transport followed by barycentric mapping.
    BarycentricOt3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Knn1,
    LinearSvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Auc,
}

/// Which end of the ranking supplies the feature budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionArm {
    /// Most similar features first (the method under evaluation).
    Descending,
    /// Least similar features first (the adversarial control).
    Ascending,
    /// Seeded random feature subset (the neutral control).
    Random,
}

impl SelectionArm {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionArm::Descending => "descending",
            SelectionArm::Ascending => "ascending",
            SelectionArm::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub repetitions: usize,
    /// Source rows kept per class in each repetition.
    pub per_class_samples: usize,
    /// Feature budgets d* to evaluate.
    pub feature_counts: Vec<usize>,
    pub strategy: SelectionStrategy,
    /// Entropy weight of the ranking problem.
    pub lambda: f64,
    pub adaptation: Adaptation,
    pub classifier: ClassifierKind,
    pub metric: Metric,
    pub arm: SelectionArm,
    pub seed: u64,
}

impl ExperimentConfig {
    /// The recognition-accuracy protocol: 19 repetitions, 20 source rows
    /// per class, 1-NN, no adaptation.
    pub fn knn_protocol(feature_counts: Vec<usize>, seed: u64) -> Self {
        Self {
            repetitions: 19,
            per_class_samples: 20,
            feature_counts,
            strategy: SelectionStrategy::ExactOt,
            lambda: 1.0,
            adaptation: Adaptation::None,
            classifier: ClassifierKind::Knn1,
            metric: Metric::Accuracy,
            arm: SelectionArm::Descending,
            seed,
        }
    }
}

/// Scores and wall times of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// repetition x feature-budget score matrix.
    pub per_repetition_scores: Vec<Vec<f64>>,
    /// Column means of the score matrix.
    pub means: Vec<f64>,
    /// Column population standard deviations.
    pub std_devs: Vec<f64>,
    /// Per-budget wall time, summed over repetitions (seconds).
    pub wall_times: Vec<f64>,
    /// repetition x feature-budget wall times (seconds).
    pub per_repetition_seconds: Vec<Vec<f64>>,
}

/// Run the protocol. Target labels are consumed only by the scoring step;
/// ranking, selection and adaptation receive an unlabeled view.
pub fn run_da_experiment(
    source: &DataMatrix,
    target: &DataMatrix,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    validate_config(source, target, config)?;

    let target_labels = target
        .labels()
        .ok_or_else(|| Error::MissingLabels("target labels are needed for scoring".into()))?
        .to_vec();
    let target_unlabeled = target.without_labels();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(source, &target_unlabeled, &target_labels, config, rep))
        .collect::<Result<Vec<_>>>()?;

    let per_repetition_scores: Vec<Vec<f64>> = rows.iter().map(|(s, _)| s.clone()).collect();
    let per_repetition_seconds: Vec<Vec<f64>> = rows.iter().map(|(_, t)| t.clone()).collect();

    let n_budgets = config.feature_counts.len();
    let reps = config.repetitions as f64;
    let mut means = vec![0.0; n_budgets];
    let mut std_devs = vec![0.0; n_budgets];
    let mut wall_times = vec![0.0; n_budgets];
    for b in 0..n_budgets {
        let mean = per_repetition_scores.iter().map(|r| r[b]).sum::<f64>() / reps;
        let var = per_repetition_scores
            .iter()
            .map(|r| (r[b] - mean) * (r[b] - mean))
            .sum::<f64>()
            / reps;
        means[b] = mean;
        std_devs[b] = var.sqrt();
        wall_times[b] = per_repetition_seconds.iter().map(|r| r[b]).sum();
    }

    Ok(ExperimentResult {
        per_repetition_scores,
        means,
        std_devs,
        wall_times,
        per_repetition_seconds,
    })
}

fn validate_config(
    source: &DataMatrix,
    target: &DataMatrix,
    config: &ExperimentConfig,
) -> Result<()> {
    if config.repetitions == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    if source.n_cols() != target.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} columns, target has {}",
            source.n_cols(),
            target.n_cols()
        )));
    }
    if config.feature_counts.is_empty() {
        return Err(Error::InvalidInput("no feature budgets given".into()));
    }
    for &d_star in &config.feature_counts {
        if d_star == 0 || d_star > source.n_cols() {
            return Err(Error::InvalidInput(format!(
                "feature budget {} outside [1, {}]",
                d_star,
                source.n_cols()
            )));
        }
    }
    if source.labels().is_none() {
        return Err(Error::MissingLabels("source must be labeled".into()));
    }
    if config.metric == Metric::Auc && config.classifier == ClassifierKind::Knn1 {
        return Err(Error::InvalidInput(
            "auc needs classifier scores; use the linear svm".into(),
        ));
    }
    if !(config.lambda > 0.0) {
        return Err(Error::InvalidInput("lambda must be positive".into()));
    }
    Ok(())
}

/// One repetition: everything stochastic derives from `seed + rep`.
fn run_repetition(
    source: &DataMatrix,
    target_unlabeled: &DataMatrix,
    target_labels: &[i64],
    config: &ExperimentConfig,
    rep: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rep_seed = config.seed.wrapping_add(rep as u64);
    let sub = balance_source_by_class(source, config.per_class_samples, rep_seed)?;

    let strategy = match config.strategy {
        SelectionStrategy::Random { .. } => SelectionStrategy::Random { seed: rep_seed },
        other => other,
    };
    let ranking = rank_features(&sub.without_labels(), target_unlabeled, strategy, config.lambda)?;

    let d = source.n_cols();
    let columns: Vec<usize> = match config.arm {
        SelectionArm::Descending => ranking.order().to_vec(),
        SelectionArm::Ascending => ranking.order().iter().rev().copied().collect(),
        SelectionArm::Random => {
            let mut cols: Vec<usize> = (0..d).collect();
            cols.shuffle(&mut ChaCha8Rng::seed_from_u64(rep_seed));
            cols
        }
    };

    let mut scores = Vec::with_capacity(config.feature_counts.len());
    let mut seconds = Vec::with_capacity(config.feature_counts.len());
    for &d_star in &config.feature_counts {
        let clock = Instant::now();
        let cols = &columns[..d_star];
        let s_d = sub.select_columns(cols)?;
        let t_d = target_unlabeled.select_columns(cols)?;

        let train = match config.adaptation {
            Adaptation::None => s_d.clone(),
            Adaptation::BarycentricOt3 => {
                let labels = s_d.labels().expect("balanced subsample is labeled");
                let cost = squared_euclidean_cost(&s_d, &t_d)?;
                let (gamma, _) = solve_class_regularized(
                    &EmpiricalMeasure::uniform(s_d.n_rows())?,
                    &EmpiricalMeasure::uniform(t_d.n_rows())?,
                    &cost,
                    labels,
                    OT3_LAMBDA,
                    OT3_ETA,
                )?;
                barycentric_map(&gamma, &t_d)?.with_labels_replaced(labels.to_vec())?
            }
        };

        let score = match config.classifier {
            ClassifierKind::Knn1 => {
                let preds = knn_predict(&train, &t_d, 1)?;
                match config.metric {
                    Metric::Accuracy => accuracy(&preds, target_labels)?,
                    Metric::Auc => unreachable!("rejected during validation"),
                }
            }
            ClassifierKind::LinearSvm => {
                let model = train_linear_svm(&train, SVM_REG, SVM_EPOCHS, rep_seed)?;
                match config.metric {
                    Metric::Accuracy => accuracy(&model.predict(&t_d), target_labels)?,
                    Metric::Auc => auc(&model.scores(&t_d), target_labels)?,
                }
            }
        };
        scores.push(score);
        seconds.push(clock.elapsed().as_secs_f64());
    }
    Ok((scores, seconds))
}
