//! Classifier, metrics and statistical tests.

mod cv;
mod logreg;
mod metrics;
pub mod stats;
mod ttest;

pub use cv::{grouped_kfold_cv, grouped_stratified_folds, kfold_cv, stratified_folds, CvReport};
pub use logreg::{
    balanced_class_weights, predict_proba, sigmoid, train_logreg, Init, LogRegConfig, LogRegModel,
    LogisticObjective, Regularization,
};
pub use metrics::{auroc, gap, gap_all, GapInput};
pub use stats::{welch_ttest, Alternative, WelchResult};
pub use ttest::{head_ttest, head_ttest_analysis, HeadTTest, TTestReport};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("both classes must be present")]
    SingleClass,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("feature count mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite input at flat index {index}")]
    NonFinite { index: usize },
    #[error("need at least {need} samples per group, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("both groups have zero variance")]
    DegenerateGroups,
    #[error("method {0:?} missing from the gap input")]
    MissingMethod(String),
    #[error("AUC {value} of method {method:?} on test set {set} is outside [0, 1]")]
    InvalidAuc { method: String, set: usize, value: f64 },
    #[error("class {class} has {count} rows, fewer than the {k} folds")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
