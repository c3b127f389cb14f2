use rayon::prelude::*;

use super::{FeatureDiagnostic, HeadView, Result, SelectError, SelectorConfig, SelectorResult, SpearmanTarget};
use crate::dataset::WindowedDataset;
use crate::model::stats::student_t_sf;

pub const SPEARMAN_ALPHA: f64 = 0.001;
pub const SPEARMAN_MIN_ROWS: usize = 10;

/// 1-based ranks, tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        order[start..end].iter().for_each(|&i| ranks[i] = avg);
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman_rho inputs differ in length");
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Rho and its two-sided p-value from the t approximation with m - 2 degrees of freedom.
pub fn spearman_with_p(x: &[f64], y: &[f64]) -> (f64, f64) {
    let rho = spearman_rho(x, y);
    let df = x.len() as f64 - 2.0;
    let denom = 1.0 - rho * rho;
    let p = if denom <= 0.0 {
        0.0
    } else {
        let t = rho * (df / denom).sqrt();
        (2.0 * student_t_sf(t.abs(), df)).min(1.0)
    };
    (rho, p)
}

/// Keeps significant heads (p < 0.001) with the strongest rank correlation to the label.
pub fn select_spearman(ds: &WindowedDataset, target: SpearmanTarget, signed: bool) -> Result<SelectorResult> {
    let config = SelectorConfig::Spearman { r: target, signed };
    config.validate()?;
    if ds.num_rows() < SPEARMAN_MIN_ROWS {
        return Err(SelectError::TooFewRows { need: SPEARMAN_MIN_ROWS, got: ds.num_rows() });
    }
    let heads = HeadView::new(ds)?;
    let f = heads.num_features();
    let y: Vec<f64> = heads.y.iter().map(|&v| f64::from(v)).collect();
    let y_ranks = average_ranks(&y);
    let stats: Vec<(f64, f64)> = (0..f)
        .into_par_iter()
        .map(|j| {
            let rho = pearson(&average_ranks(&heads.x.column(j)), &y_ranks);
            let df = heads.y.len() as f64 - 2.0;
            let denom = 1.0 - rho * rho;
            let p = if denom <= 0.0 { 0.0 } else { (2.0 * student_t_sf((rho * (df / denom).sqrt()).abs(), df)).min(1.0) };
            (rho, p)
        })
        .collect();

    let score = |j: usize| if signed { stats[j].0 } else { stats[j].0.abs() };
    let mut candidates: Vec<usize> = (0..f).filter(|&j| stats[j].1 < SPEARMAN_ALPHA && (!signed || stats[j].0 > 0.0)).collect();
    candidates.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    let selected: Vec<usize> = match target {
        SpearmanTarget::Fraction(r) => candidates.into_iter().take((r * f as f64).ceil() as usize).collect(),
        SpearmanTarget::Auto => {
            let best = candidates.first().map(|&j| score(j)).unwrap_or(0.0);
            candidates.into_iter().filter(|&j| score(j) > best / 2.0).collect()
        }
    };
    let diagnostics = heads
        .names
        .iter()
        .zip(&stats)
        .map(|(name, &(rho, p))| FeatureDiagnostic { rho: Some(rho), p_value: Some(p), ..FeatureDiagnostic::named(name) })
        .collect();
    Ok(SelectorResult::build(config, &heads, selected, diagnostics))
}
