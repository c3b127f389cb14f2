//! Contextual hallucination detection from passage-attention features.
//!
//! The crate is organised as a pipeline over portable trace files:
//!
//! - [`trace_io`]: the `ATRC` attention-trace and `AHST` hidden-state-trace formats.
//! - [`aggregate`]: per-token, per-head reductions of passage attention
//!   (sum, cosine similarity, entropy, Jensen-Shannon distance).
//! - [`dataset`]: sliding-window averaging, window labels, min-max scaling, `AGDS` files.
//! - [`select`]: head selectors (median ratio, random-shadow, Lasso, Spearman).
//! - [`model`]: balanced logistic regression, AUROC, Gap, Welch's t-test, stratified CV.
//! - [`synth`]: synthetic traces with a planted hallucination signal.
//! - [`eval`]: the source/target evaluation protocol and selector sweeps.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is how NaN gets rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod dataset;
pub mod eval;
pub mod matrix;
pub mod model;
pub mod select;
pub mod synth;
pub mod trace_io;

mod rng;

pub use aggregate::{AggregationKind, TokenFeatureSequence};
pub use dataset::{MinMaxScaler, WindowConfig, WindowedDataset};
pub use matrix::Matrix;
pub use model::{LogRegConfig, LogRegModel, Regularization};
pub use select::{SelectorConfig, SelectorResult};
pub use trace_io::{AttentionTrace, HiddenTrace, TraceHeader};

/// Crate-wide error, one variant per pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] trace_io::TraceError),
    #[error(transparent)]
    Aggregate(#[from] aggregate::AggregateError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Select(#[from] select::SelectError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}

pub type Result<T> = std::result::Result<T, Error>;
