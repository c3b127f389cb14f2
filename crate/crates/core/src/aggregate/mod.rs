//! Reduction of each head's passage attention to one scalar per generated token.
//!
//! Four reductions are provided. `Sum` and `CosSim` work on the raw passage
//! rows. `Entropy` and `JsDiv` first append the residual mass `1 - Σ row`
//! so that the row becomes a distribution over `C + 1` outcomes.

mod featurize;
mod kernels;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use featurize::{
    align_shift, featurize, featurize_reader, AlignedStep, Featurizer, HeadId, TokenFeatureSequence,
};
pub use kernels::{
    agg_cossim, agg_entropy, agg_jsdiv, agg_sum, extend_residual, passage_pct, CosSimOutput,
    ExtendedDistribution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    #[default]
    Sum,
    CosSim,
    Entropy,
    JsDiv,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 4] =
        [AggregationKind::Sum, AggregationKind::CosSim, AggregationKind::Entropy, AggregationKind::JsDiv];

    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::Sum => "sum",
            AggregationKind::CosSim => "cossim",
            AggregationKind::Entropy => "entropy",
            AggregationKind::JsDiv => "jsdiv",
        }
    }

    /// Whether the reduction runs on the residual-extended distribution.
    pub fn uses_residual(self) -> bool {
        matches!(self, AggregationKind::Entropy | AggregationKind::JsDiv)
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationKind {
    type Err = AggregateError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sum" => Ok(AggregationKind::Sum),
            "cossim" | "cosine" => Ok(AggregationKind::CosSim),
            "entropy" => Ok(AggregationKind::Entropy),
            "jsdiv" | "js" => Ok(AggregationKind::JsDiv),
            _ => Err(AggregateError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AggregateError {
    #[error("negative attention score {value} at passage index {index}")]
    Negative { index: usize, value: f64 },
    #[error("non-finite attention score at passage index {index}")]
    NonFinite { index: usize },
    #[error("cosine similarity needs at least 2 heads per layer, got {0}")]
    TooFewHeads(usize),
    #[error("unknown aggregation kind {0:?} (expected sum, cossim, entropy or jsdiv)")]
    UnknownKind(String),
    #[error("record {found} arrived out of order (expected {expected})")]
    OutOfOrder { expected: usize, found: usize },
    #[error(transparent)]
    Trace(#[from] crate::trace_io::TraceError),
}

pub type Result<T> = std::result::Result<T, AggregateError>;
