use serde::{Deserialize, Serialize};

use super::{DatasetError, Result, WindowedDataset};
use crate::matrix::Matrix;

/// Per-column min-max scaling fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(DatasetError::Empty);
        }
        let mut mins = x.row(0).to_vec();
        let mut maxs = mins.clone();
        for row in x.rows_iter().skip(1) {
            for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn fit_dataset(train: &WindowedDataset) -> Result<Self> {
        Self::fit(&train.x)
    }

    pub fn num_features(&self) -> usize {
        self.mins.len()
    }

    /// `(x - min) / (max - min)` without clipping; constant columns map to 0.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.num_features() {
            return Err(DatasetError::DimensionMismatch { expected: self.num_features(), found: x.ncols() });
        }
        let mut out = x.clone();
        for i in 0..out.nrows() {
            for ((v, &lo), &hi) in out.row_mut(i).iter_mut().zip(&self.mins).zip(&self.maxs) {
                let range = hi - lo;
                *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Restricts the scaler to a subset of its columns.
    pub fn select(&self, cols: &[usize]) -> MinMaxScaler {
        MinMaxScaler {
            mins: cols.iter().map(|&c| self.mins[c]).collect(),
            maxs: cols.iter().map(|&c| self.maxs[c]).collect(),
        }
    }
}
