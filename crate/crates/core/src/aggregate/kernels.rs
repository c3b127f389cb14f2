use std::f64::consts::LN_2;

use super::{AggregateError, Result};
use crate::trace_io::TraceHeader;

/// A passage row with the residual mass appended as the last element.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDistribution {
    probs: Vec<f64>,
}

impl ExtendedDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn residual(&self) -> f64 {
        *self.probs.last().expect("extended distribution is never empty")
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Appends `max(0, 1 - Σ row)`; a row summing above 1 is divided by its sum instead.
pub fn extend_residual(row: &[f64]) -> Result<ExtendedDistribution> {
    let mut sum = 0.0;
    for (index, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(AggregateError::NonFinite { index });
        }
        if v < 0.0 {
            return Err(AggregateError::Negative { index, value: v });
        }
        sum += v;
    }
    let mut probs = Vec::with_capacity(row.len() + 1);
    if sum > 1.0 {
        probs.extend(row.iter().map(|v| v / sum));
        probs.push(0.0);
    } else {
        probs.extend_from_slice(row);
        probs.push(1.0 - sum);
    }
    Ok(ExtendedDistribution { probs })
}

/// Total passage attention of one head.
pub fn agg_sum(row: &[f64]) -> f64 {
    row.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosSimOutput {
    /// Mean cosine similarity of each head to the other heads of its layer.
    pub values: Vec<f64>,
    /// Heads whose passage row has zero norm; their cosines are taken as 0.
    pub zero_norm: Vec<usize>,
}

/// Mean pairwise cosine similarity per head; `layer` is `[head][passage]`.
pub fn agg_cossim(layer: &[f64], passage: usize) -> Result<CosSimOutput> {
    assert!(passage > 0 && layer.len().is_multiple_of(passage), "layer slice is not [heads][passage]");
    let heads = layer.len() / passage;
    if heads < 2 {
        return Err(AggregateError::TooFewHeads(heads));
    }
    let rows: Vec<&[f64]> = layer.chunks_exact(passage).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let zero_norm: Vec<usize> = (0..heads).filter(|&h| norms[h] == 0.0).collect();

    let mut totals = vec![0.0; heads];
    for a in 0..heads {
        for b in (a + 1)..heads {
            if norms[a] == 0.0 || norms[b] == 0.0 {
                continue;
            }
            let dot: f64 = rows[a].iter().zip(rows[b]).map(|(x, y)| x * y).sum();
            let cos = (dot / (norms[a] * norms[b])).min(1.0);
            totals[a] += cos;
            totals[b] += cos;
        }
    }
    let denom = (heads - 1) as f64;
    Ok(CosSimOutput { values: totals.into_iter().map(|t| t / denom).collect(), zero_norm })
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn agg_entropy(dist: &ExtendedDistribution) -> f64 {
    let h: f64 = dist.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    h.clamp(0.0, (dist.len() as f64).log2())
}

/// Jensen-Shannon distance (natural log) of each head to the layer's mean distribution.
pub fn agg_jsdiv(dists: &[ExtendedDistribution]) -> Vec<f64> {
    let Some(first) = dists.first() else {
        return Vec::new();
    };
    let n = first.len();
    let heads = dists.len() as f64;
    let mut reference = vec![0.0; n];
    for d in dists {
        assert_eq!(d.len(), n, "distributions of one layer must have equal length");
        for (r, p) in reference.iter_mut().zip(&d.probs) {
            *r += p;
        }
    }
    for r in &mut reference {
        *r /= heads;
    }

    let kl_term = |p: f64, m: f64| if p > 0.0 { p * (p / m).ln() } else { 0.0 };
    let bound = LN_2.sqrt();
    dists
        .iter()
        .map(|d| {
            let total: f64 = d
                .probs
                .iter()
                .zip(&reference)
                .map(|(&p, &r)| {
                    let m = 0.5 * (p + r);
                    kl_term(p, m) + kl_term(r, m)
                })
                .sum();
            (0.5 * total).max(0.0).sqrt().min(bound)
        })
        .collect()
}

/// Passage share of the visible input when token `t` was generated.
pub fn passage_pct(header: &TraceHeader, t: usize) -> f64 {
    header.passage_len as f64 / header.input_len_at_step[t] as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> ExtendedDistribution {
        ExtendedDistribution { probs: p.to_vec() }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(extend_residual(&[0.5, 0.25]).unwrap().probs(), &[0.5, 0.25, 0.25]);
        assert_eq!(extend_residual(&[0.5, 0.5]).unwrap().residual(), 0.0);
        let over = extend_residual(&[0.5, 0.50005]).unwrap();
        assert_eq!(over.residual(), 0.0);
        assert!((over.probs()[0] - 0.5 / 1.00005).abs() < 1e-15);
        assert!((over.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(matches!(extend_residual(&[0.1, -0.1]), Err(AggregateError::Negative { index: 1, .. })));
    }

    #[test]
    fn sum_examples() {
        assert!((agg_sum(&[0.2, 0.3, 0.1]) - 0.6).abs() < 1e-15);
        assert_eq!(agg_sum(&[0.0; 5]), 0.0);
    }

    #[test]
    fn cossim_examples() {
        let same = agg_cossim(&[0.3, 0.7, 0.3, 0.7], 2).unwrap();
        assert!(same.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let ortho = agg_cossim(&[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(ortho.values, vec![0.0, 0.0]);
        assert!(matches!(agg_cossim(&[0.5, 0.5], 2), Err(AggregateError::TooFewHeads(1))));
    }

    #[test]
    fn cossim_dead_head_flagged() {
        let out = agg_cossim(&[0.0, 0.0, 0.4, 0.2, 0.4, 0.2], 2).unwrap();
        assert_eq!(out.zero_norm, vec![0]);
        assert_eq!(out.values[0], 0.0);
        // head 1 and head 2 are identical; their single live partner contributes 1 of 2 terms
        assert!((out.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cossim_scale_invariant() {
        let base = agg_cossim(&[0.1, 0.3, 0.2, 0.2, 0.05, 0.4], 2).unwrap();
        let scaled = agg_cossim(&[0.1, 0.3, 0.6, 0.6, 0.05, 0.4], 2).unwrap();
        for (a, b) in base.values.iter().zip(&scaled.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((agg_entropy(&dist(&[0.5, 0.25, 0.25])) - 1.5).abs() < 1e-15);
        assert_eq!(agg_entropy(&dist(&[1.0, 0.0])), 0.0);
    }

    #[test]
    fn jsdiv_examples() {
        let same = agg_jsdiv(&[dist(&[0.2, 0.3, 0.5]), dist(&[0.2, 0.3, 0.5])]);
        assert_eq!(same, vec![0.0, 0.0]);
        let disjoint = agg_jsdiv(&[dist(&[1.0, 0.0, 0.0]), dist(&[0.0, 1.0, 0.0])]);
        for v in disjoint {
            assert!((v - 0.46450).abs() < 1e-4, "{v}");
        }
        assert!(agg_jsdiv(&[]).is_empty());
    }

    #[test]
    fn passage_pct_examples() {
        let mut h = TraceHeader {
            model_name: String::new(),
            num_layers: 1,
            num_heads: 1,
            passage_len: 100,
            num_generated: 3,
            input_len_at_step: vec![400, 500, 100],
            token_labels: None,
            has_hidden: false,
            hidden_dim: None,
            hidden_layers: None,
        };
        assert_eq!(passage_pct(&h, 0), 0.25);
        assert_eq!(passage_pct(&h, 1), 0.20);
        h.input_len_at_step[2] = 100;
        assert_eq!(passage_pct(&h, 2), 1.0);
    }
}
