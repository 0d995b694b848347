//! Stroke classifiers, decision strategies and evaluation metrics.

pub mod classify;
pub mod knn;
pub mod metrics;
pub mod strategy;
pub mod svm;
pub mod trees;

pub use classify::{
    cross_validate, train_stroke_classifier, Classifier, ClassifierSpec, LabeledStrokeSample, MicFeature, StrokeSample,
};
pub use metrics::{compute_metrics, rank_candidates, CellResult, MetricsReport};
pub use strategy::{
    d1_infer, d2_infer, d3_infer, infer, train_models, CandidateSet, GroupTables, Mode, ModelBundle, Observation,
    Strategy,
};
