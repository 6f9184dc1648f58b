//! Security classifiers and the evaluation protocol around them.

pub mod cart;
pub mod dataset;
pub mod forest;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod scaling;
pub mod svm;

pub use dataset::{split_dataset, split_indices, CaseKey, Dataset, Provenance, SplitIndices, SplitSpec};
pub use metrics::{aggregate_runs, ConfidenceInterval, Confusion, Metrics};
pub use model::{
    cross_validate, evaluate, train_classifier, Algorithm, CartHyper, ClassifierModel, CvReport, Hyperparameters,
    ModelParameters, Prediction, SvmHyper,
};
