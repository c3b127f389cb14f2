//! Source/target evaluation protocol, selector sweeps and report tables.
//!
//! A protocol run fits scaler, selector and classifier on source-train only,
//! reports k-fold CV AUROC on source-train, and scores the source test set and
//! two target test sets.

mod load;
mod protocol;
mod sweep;
mod table;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use load::{featurize_path, list_inputs, load_dataset, InputKind, LoadOptions, FEATURE_EXT};
pub use protocol::{
    evaluate_fitted, fit_pipeline, run_protocol, run_protocol_data, split_by_trace, EvaluationReport, FittedPipeline,
    ProtocolConfig, ProtocolData, ProtocolSettings, RowCounts,
};
pub use sweep::{sweep_selectors, SweepCell, SweepReport};
pub use table::{format_table, TableRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Split,
    Select,
    Scale,
    Train,
    Validate,
    Score,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Select => "select",
            Stage::Scale => "scale",
            Stage::Train => "train",
            Stage::Validate => "validate",
            Stage::Score => "score",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{stage} stage failed: {source}")]
    Stage { stage: Stage, source: Box<crate::Error> },
    #[error("{}: {source}", path.display())]
    Load { path: PathBuf, source: Box<crate::Error> },
    #[error("invalid protocol configuration: {0}")]
    Config(String),
}

impl EvalError {
    pub(crate) fn at<E: Into<crate::Error>>(stage: Stage) -> impl FnOnce(E) -> EvalError {
        move |e| EvalError::Stage { stage, source: Box::new(e.into()) }
    }

    /// Innermost pipeline error.
    pub fn root(&self) -> Option<&crate::Error> {
        match self {
            EvalError::Stage { source, .. } | EvalError::Load { source, .. } => match source.as_ref() {
                crate::Error::Eval(inner) => inner.root().or(Some(source)),
                other => Some(other),
            },
            EvalError::Config(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;
