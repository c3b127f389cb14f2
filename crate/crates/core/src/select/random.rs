use rand::Rng;
use rayon::prelude::*;

use super::{FeatureDiagnostic, HeadView, Result, SelectorConfig, SelectorResult};
use crate::dataset::{MinMaxScaler, WindowedDataset};
use crate::model::{train_logreg, LogRegConfig, LogRegModel};

/// Random-shadow selection: each of `n` rounds appends a uniform[0,1] column
/// and keeps heads whose coefficient magnitude beats the shadow's. Heads
/// accepted in at least `k` rounds are selected.
///
/// With `positive_only`, the coefficient must also be positive toward the
/// non-hallucinated class, i.e. negative under the `y = 1` hallucination label
/// the model is fitted on. These are the heads whose values drop on
/// hallucinated windows.
pub fn select_random(ds: &WindowedDataset, n: usize, k: usize, positive_only: bool, seed: u64) -> Result<SelectorResult> {
    let config = if positive_only {
        SelectorConfig::RandomPos { n, k, seed }
    } else {
        SelectorConfig::Random { n, k, seed }
    };
    config.validate()?;
    let heads = HeadView::new(ds)?;
    let scaled = MinMaxScaler::fit(&heads.x)?.transform(&heads.x)?;
    let f = heads.num_features();
    let fit = LogRegConfig::default();

    let rounds: Vec<LogRegModel> = (0..n as u64)
        .into_par_iter()
        .map(|round| {
            let mut rng = crate::rng::substream(seed, round);
            let shadow: Vec<f64> = (0..scaled.nrows()).map(|_| rng.random::<f64>()).collect();
            train_logreg(&scaled.with_column(&shadow), &heads.y, &fit)
        })
        .collect::<std::result::Result<_, _>>()?;

    let mut accepted = vec![0usize; f];
    let mut coef_sum = vec![0.0; f];
    for model in &rounds {
        let shadow = model.weights[f].abs();
        for j in 0..f {
            let c = model.weights[j];
            coef_sum[j] += c;
            if c.abs() > shadow && (!positive_only || c < 0.0) {
                accepted[j] += 1;
            }
        }
    }
    let selected: Vec<usize> = (0..f).filter(|&j| accepted[j] >= k).collect();
    let diagnostics = heads
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| FeatureDiagnostic {
            coef: Some(coef_sum[j] / n as f64),
            accepted_rounds: Some(accepted[j]),
            ..FeatureDiagnostic::named(name)
        })
        .collect();
    let mut result = SelectorResult::build(config, &heads, selected, diagnostics);
    result.converged = rounds.iter().all(|m| m.converged);
    Ok(result)
}
