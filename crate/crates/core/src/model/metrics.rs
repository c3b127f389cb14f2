use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Area under the ROC curve from the rank-sum (Mann-Whitney) statistic, ties
/// credited one half.
///
/// Work is done in doubled integer units, so the result is the exact rational
/// `U / (P·N)` rounded once.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(ModelError::LengthMismatch { expected: scores.len(), found: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(ModelError::NonFinite { index: i });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // 2·R1 where R1 is the sum of (1-based, tie-averaged) ranks of positives
    let mut rank_sum2: u128 = 0;
    let mut start = 0usize;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        // average rank of the group is (start + 1 + end) / 2
        rank_sum2 += group_pos * (start as u128 + 1 + end as u128);
        start = end;
    }
    let u2 = rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

/// AUC triples of each method over the three test sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapInput {
    pub aucs: BTreeMap<String, [f64; 3]>,
}

impl GapInput {
    pub fn insert(&mut self, method: impl Into<String>, aucs: [f64; 3]) {
        self.aucs.insert(method.into(), aucs);
    }

    fn validate(&self) -> Result<[f64; 3]> {
        if self.aucs.is_empty() {
            return Err(ModelError::MissingMethod("<empty method set>".into()));
        }
        let mut best = [f64::NEG_INFINITY; 3];
        for (name, row) in &self.aucs {
            for (s, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ModelError::InvalidAuc { method: name.clone(), set: s, value: v });
                }
                best[s] = best[s].max(v);
            }
        }
        Ok(best)
    }
}

/// Mean relative shortfall (in percent) of `method` from the per-set maximum over the method set.
pub fn gap(input: &GapInput, method: &str) -> Result<f64> {
    let best = input.validate()?;
    let row = input.aucs.get(method).ok_or_else(|| ModelError::MissingMethod(method.to_string()))?;
    let total: f64 = row
        .iter()
        .zip(&best)
        .map(|(&auc, &max)| if max > 0.0 { (max - auc) / max } else { 0.0 })
        .sum();
    Ok(total / 3.0 * 100.0)
}

pub fn gap_all(input: &GapInput) -> Result<BTreeMap<String, f64>> {
    input.aucs.keys().map(|m| gap(input, m).map(|g| (m.clone(), g))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.2], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(auroc(&[0.5; 6], &[1, 0, 1, 0, 0, 0]).unwrap(), 0.5);
        // one positive tied with one negative above the other negative: (1 + 0.5) / 2
        assert_eq!(auroc(&[0.4, 0.4, 0.1], &[1, 0, 0]).unwrap(), 0.75);
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(ModelError::SingleClass)));
        assert!(auroc(&[f64::NAN, 0.2], &[0, 1]).is_err());
    }

    #[test]
    fn gap_examples() {
        let mut g = GapInput::default();
        g.insert("best", [0.8, 0.7, 0.9]);
        g.insert("other", [0.4, 0.7, 0.45]);
        assert_eq!(gap(&g, "best").unwrap(), 0.0);
        assert!((gap(&g, "other").unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert!(matches!(gap(&g, "missing"), Err(ModelError::MissingMethod(_))));

        let mut solo = GapInput::default();
        solo.insert("only", [0.61, 0.52, 0.73]);
        assert_eq!(gap(&solo, "only").unwrap(), 0.0);

        g.insert("bad", [1.2, 0.5, 0.5]);
        assert!(matches!(gap(&g, "best"), Err(ModelError::InvalidAuc { .. })));
    }
}
