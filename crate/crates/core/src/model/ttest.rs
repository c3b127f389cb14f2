use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{welch_ttest, Alternative};
use super::{ModelError, Result};
use crate::dataset::WindowedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTTest {
    pub feature: String,
    pub column: usize,
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for mean(y = 0) > mean(y = 1).
    pub p_value: f64,
    pub pass: bool,
    /// Both groups constant; reported with p = 1 and never passing.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub alpha: f64,
    pub heads: Vec<HeadTTest>,
    pub pass_pct: f64,
}

/// Per head column, tests whether non-hallucinated windows have the higher mean feature.
pub fn head_ttest(ds: &WindowedDataset, alpha: f64) -> Result<TTestReport> {
    let (neg, pos) = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(ModelError::SingleClass);
    }
    let columns = ds.head_columns();
    let heads = columns
        .par_iter()
        .map(|&c| {
            let col = ds.x.column(c);
            let clean: Vec<f64> = col.iter().zip(&ds.y).filter(|(_, &y)| y == 0).map(|(v, _)| *v).collect();
            let halluc: Vec<f64> = col.iter().zip(&ds.y).filter(|(_, &y)| y == 1).map(|(v, _)| *v).collect();
            let feature = ds.feature_names[c].clone();
            match welch_ttest(&clean, &halluc, Alternative::Greater) {
                Ok(r) => Ok(HeadTTest { feature, column: c, t: r.t, df: r.df, p_value: r.p_value, pass: r.p_value < alpha, degenerate: false }),
                Err(ModelError::DegenerateGroups) => {
                    Ok(HeadTTest { feature, column: c, t: 0.0, df: 0.0, p_value: 1.0, pass: false, degenerate: true })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let passing = heads.iter().filter(|h| h.pass).count();
    let pass_pct = if heads.is_empty() { 0.0 } else { 100.0 * passing as f64 / heads.len() as f64 };
    Ok(TTestReport { alpha, heads, pass_pct })
}

/// One report per dataset.
pub fn head_ttest_analysis(datasets: &[WindowedDataset], alpha: f64) -> Result<Vec<TTestReport>> {
    datasets.iter().map(|d| head_ttest(d, alpha)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn single_class_is_error() {
        let ds = WindowedDataset {
            x: Matrix::zeros(3, 1),
            y: vec![0, 0, 0],
            feature_names: vec!["l0h0".into()],
            source_ids: vec![],
        };
        assert!(matches!(head_ttest(&ds, 0.01), Err(ModelError::SingleClass)));
    }

    #[test]
    fn passage_column_excluded_and_constant_head_degenerate() {
        let ds = WindowedDataset {
            x: Matrix::from_rows(&[[1.0, 0.5, 9.0], [1.1, 0.5, 9.0], [0.1, 0.5, 9.0], [0.2, 0.5, 9.0]]),
            y: vec![0, 0, 1, 1],
            feature_names: vec!["l0h0".into(), "l0h1".into(), "passage_pct".into()],
            source_ids: vec![],
        };
        let r = head_ttest(&ds, 0.05).unwrap();
        assert_eq!(r.heads.len(), 2);
        assert!(r.heads[0].pass);
        assert!(r.heads[1].degenerate && !r.heads[1].pass);
        assert_eq!(r.pass_pct, 50.0);
    }
}
