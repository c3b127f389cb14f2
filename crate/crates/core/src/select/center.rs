use rayon::prelude::*;

use super::{FeatureDiagnostic, HeadView, Result, SelectorConfig, SelectorResult};
use crate::dataset::WindowedDataset;

const RATIO_EPS: f64 = 1e-12;

/// Median with the two middle values averaged for even lengths. `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn guarded(denominator: f64) -> f64 {
    if denominator.abs() < RATIO_EPS {
        RATIO_EPS.copysign(denominator)
    } else {
        denominator
    }
}

/// Keeps the ⌈rF/2⌉ heads with the highest ratio
/// `median(x | y=0) / median(x | y=1)`, then the ⌈rF/2⌉ lowest among the rest.
pub fn select_center(ds: &WindowedDataset, r: f64) -> Result<SelectorResult> {
    let config = SelectorConfig::Center { r };
    config.validate()?;
    let heads = HeadView::new(ds)?;
    let f = heads.num_features();
    let ratios: Vec<f64> = (0..f)
        .into_par_iter()
        .map(|j| {
            let col = heads.x.column(j);
            let clean: Vec<f64> = col.iter().zip(&heads.y).filter(|(_, &y)| y == 0).map(|(v, _)| *v).collect();
            let halluc: Vec<f64> = col.iter().zip(&heads.y).filter(|(_, &y)| y == 1).map(|(v, _)| *v).collect();
            // both classes are present, so the medians exist
            median(&clean).unwrap_or(0.0) / guarded(median(&halluc).unwrap_or(0.0))
        })
        .collect();

    let per_tail = ((r * f as f64) / 2.0).ceil() as usize;
    let mut by_high: Vec<usize> = (0..f).collect();
    by_high.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]).then(a.cmp(&b)));
    let mut by_low: Vec<usize> = (0..f).collect();
    by_low.sort_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = by_high.iter().take(per_tail).copied().collect();
    let low: Vec<usize> = by_low.iter().filter(|j| !selected.contains(j)).take(per_tail).copied().collect();
    selected.extend(low);

    let diagnostics = heads
        .names
        .iter()
        .zip(&ratios)
        .map(|(name, &ratio)| FeatureDiagnostic { ratio: Some(ratio), ..FeatureDiagnostic::named(name) })
        .collect();
    Ok(SelectorResult::build(config, &heads, selected, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::super::test_util::dataset;
    use super::super::SelectError;
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn ratio_of_medians() {
        let ds = dataset(&[vec![0.6, 0.6, 0.6, 0.3, 0.3, 0.3]], &[0, 0, 0, 1, 1, 1], true);
        let r = select_center(&ds, 1.0).unwrap();
        assert!((r.diagnostics[0].ratio.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn picks_both_tails() {
        let y = [0, 0, 0, 1, 1, 1];
        let cols = vec![
            vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            vec![0.9, 0.9, 0.9, 0.1, 0.1, 0.1], // ratio 9
            vec![0.4, 0.5, 0.6, 0.5, 0.4, 0.6],
            vec![0.1, 0.1, 0.1, 0.8, 0.8, 0.8], // ratio 1/8
            vec![0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
        ];
        let ds = dataset(&cols, &y, true);
        let r = select_center(&ds, 2.0 / 5.0).unwrap();
        assert_eq!(r.selected, vec![1, 3]);
        assert_eq!(r.keep_columns(&ds), vec![1, 3, 5]);
        assert_eq!(select_center(&ds, 1.0).unwrap().selected, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let y = [0, 1];
        let cols = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let r = select_center(&dataset(&cols, &y, false), 0.5).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
    }

    #[test]
    fn zero_denominator_is_guarded() {
        let ds = dataset(&[vec![0.5, 0.5, 0.0, 0.0]], &[0, 0, 1, 1], false);
        let r = select_center(&ds, 1.0).unwrap();
        assert!(r.diagnostics[0].ratio.unwrap().is_finite());
    }

    #[test]
    fn single_class_rejected() {
        let ds = dataset(&[vec![0.5, 0.3]], &[1, 1], false);
        assert!(matches!(select_center(&ds, 0.5), Err(SelectError::SingleClass)));
    }
}
