//! Classifiers, metrics, synthetic data and the evaluation protocol.

mod classify;
mod experiment;
mod metrics;
mod synth;

pub use classify::{knn_predict, train_linear_svm, LinearSvm};
pub use experiment::{
    run_da_experiment, Adaptation, ClassifierKind, ExperimentConfig, ExperimentResult, Metric,
    SelectionArm, OT3_ETA, OT3_LAMBDA, SVM_EPOCHS, SVM_REG,
};
pub use metrics::{accuracy, auc};
pub use synth::{
    generate_shifted_dataset, generate_shifted_dataset_with, ShiftKind, ShiftedDatasetParams,
};
