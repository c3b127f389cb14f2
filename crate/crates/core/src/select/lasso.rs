use super::{FeatureDiagnostic, HeadView, Result, SelectorConfig, SelectorResult};
use crate::dataset::{MinMaxScaler, WindowedDataset};
use crate::model::{train_logreg, LogRegConfig, Regularization};

const NONZERO: f64 = 1e-8;

/// Keeps heads with a non-zero coefficient in an L1-regularised balanced fit.
/// Non-convergence is reported through [`SelectorResult::converged`].
pub fn select_lasso(ds: &WindowedDataset, strength: f64) -> Result<SelectorResult> {
    let config = SelectorConfig::Lasso { strength };
    config.validate()?;
    let heads = HeadView::new(ds)?;
    let scaled = MinMaxScaler::fit(&heads.x)?.transform(&heads.x)?;
    let fit = LogRegConfig { reg: Regularization::L1(strength), ..LogRegConfig::default() };
    let model = train_logreg(&scaled, &heads.y, &fit)?;
    let selected = (0..heads.num_features()).filter(|&j| model.weights[j].abs() > NONZERO).collect();
    let diagnostics = heads
        .names
        .iter()
        .zip(&model.weights)
        .map(|(name, &c)| FeatureDiagnostic { coef: Some(c), ..FeatureDiagnostic::named(name) })
        .collect();
    let mut result = SelectorResult::build(config, &heads, selected, diagnostics);
    result.converged = model.converged;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::super::test_util::dataset;
    use super::*;

    fn fixture() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = crate::rng::substream(5, 0);
        let y: Vec<u8> = (0..300).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let copy: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let noise: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        (vec![copy, noise], y)
    }

    #[test]
    fn keeps_label_copy_drops_noise() {
        let (cols, y) = fixture();
        let r = select_lasso(&dataset(&cols, &y, true), 5.0).unwrap();
        assert!(r.converged);
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn strength_limits() {
        let (cols, y) = fixture();
        let ds = dataset(&cols, &y, false);
        assert!(select_lasso(&ds, 1e6).unwrap().selected.is_empty());
        assert_eq!(select_lasso(&ds, 1e-6).unwrap().selected, vec![0, 1]);
    }
}
