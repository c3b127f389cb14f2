//! Windowed training tables built from token-level features.
//!
//! Each trace contributes overlapping windows of `window_size` tokens; a
//! window's features are per-column means over its tokens and its label is 1
//! when any token in it is hallucinated.

mod agds;
mod hidden;
mod scaler;
mod window;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub use agds::{read_dataset, sidecar_path, write_dataset, DatasetSidecar};
pub use hidden::{hidden_featurize, HiddenOptions};
pub use scaler::MinMaxScaler;
pub use window::{concat_datasets, make_windows, window_count, window_ranges};

/// Column name of the passage-percentage feature.
pub const PASSAGE_PCT: &str = "passage_pct";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { window_size: 8, stride: 1 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.stride == 0 {
            return Err(DatasetError::InvalidWindow(*self));
        }
        Ok(())
    }
}

/// Origin of one window: trace identifier and first token index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceId {
    pub trace: String,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
    pub source_ids: Vec<SourceId>,
}

impl WindowedDataset {
    pub fn num_rows(&self) -> usize {
        self.y.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Index of the passage-percentage column, if present.
    pub fn passage_column(&self) -> Option<usize> {
        self.feature_names.iter().position(|n| n == PASSAGE_PCT)
    }

    /// Indices of every column except the passage percentage.
    pub fn head_columns(&self) -> Vec<usize> {
        (0..self.num_features()).filter(|&j| self.feature_names[j] != PASSAGE_PCT).collect()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        (self.y.len() - pos, pos)
    }

    pub fn select_rows(&self, rows: &[usize]) -> WindowedDataset {
        WindowedDataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            feature_names: self.feature_names.clone(),
            source_ids: rows.iter().map(|&r| self.source_ids[r].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> WindowedDataset {
        WindowedDataset {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            source_ids: self.source_ids.clone(),
        }
    }

    /// Distinct trace identifiers in first-appearance order.
    pub fn trace_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.source_ids.iter().filter(|s| seen.insert(s.trace.as_str())).map(|s| s.trace.clone()).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.x.as_slice().iter().position(|v| !v.is_finite()) {
            Some(i) => Err(DatasetError::NonFinite { row: i / self.num_features().max(1), col: i % self.num_features().max(1) }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("feature sequence has no token labels")]
    MissingLabels,
    #[error("invalid window configuration {0:?}: size and stride must be >= 1")]
    InvalidWindow(WindowConfig),
    #[error("feature schema mismatch between parts {first} and {other}")]
    SchemaMismatch { first: usize, other: usize },
    #[error("dataset has no rows")]
    Empty,
    #[error("column count mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sidecar json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;
