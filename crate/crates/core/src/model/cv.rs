use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auroc, predict_proba, train_logreg, LogRegConfig, ModelError, Result};
use crate::dataset::MinMaxScaler;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_aurocs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std: f64,
}

/// Held-out row indices of each fold, stratified by label; each list is sorted.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(ModelError::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < k {
            return Err(ModelError::ClassTooSmall { class, count: idx.len(), k });
        }
        let mut rng = crate::rng::substream(seed, u64::from(class));
        idx.shuffle(&mut rng);
        for (i, row) in idx.into_iter().enumerate() {
            folds[i % k].push(row);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Held-out row indices of each fold with whole groups kept together.
///
/// Groups are stratified on whether they contain a positive row and, within
/// each stratum, placed in shuffled order on the fold with the fewest rows.
pub fn grouped_stratified_folds(y: &[u8], groups: &[String], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(ModelError::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    if groups.len() != y.len() {
        return Err(ModelError::LengthMismatch { expected: y.len(), found: groups.len() });
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (stratum, positive) in [true, false].into_iter().enumerate() {
        let mut keys: Vec<&str> =
            members.iter().filter(|(_, rows)| rows.iter().any(|&i| y[i] == 1) == positive).map(|(g, _)| *g).collect();
        let mut rng = crate::rng::substream(seed, 10 + stratum as u64);
        keys.shuffle(&mut rng);
        for g in keys {
            let target = (0..k).min_by_key(|&f| (folds[f].len(), f)).unwrap_or(0);
            folds[target].extend_from_slice(&members[g]);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    for class in [0u8, 1u8] {
        let missing = folds.iter().filter(|f| !f.iter().any(|&i| y[i] == class)).count();
        if missing > 0 {
            let count = y.iter().filter(|&&v| v == class).count();
            return Err(ModelError::ClassTooSmall { class, count, k });
        }
    }
    Ok(folds)
}

fn cv_over_folds(x: &Matrix, y: &[u8], folds: &[Vec<usize>], cfg: &LogRegConfig) -> Result<CvReport> {
    let fold_aurocs = folds
        .par_iter()
        .map(|held_out| {
            let mut mask = vec![false; y.len()];
            held_out.iter().for_each(|&i| mask[i] = true);
            let train: Vec<usize> = (0..y.len()).filter(|&i| !mask[i]).collect();
            let x_train = x.select_rows(&train);
            let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let scaler = MinMaxScaler::fit(&x_train)?;
            let model = train_logreg(&scaler.transform(&x_train)?, &y_train, cfg)?;
            let x_test = scaler.transform(&x.select_rows(held_out))?;
            let y_test: Vec<u8> = held_out.iter().map(|&i| y[i]).collect();
            auroc(&predict_proba(&model, &x_test)?, &y_test)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = fold_aurocs.len() as f64;
    let mean = fold_aurocs.iter().sum::<f64>() / n;
    let std = (fold_aurocs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(CvReport { fold_aurocs, mean, std })
}

fn check_rows(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(ModelError::LengthMismatch { expected: x.nrows(), found: y.len() });
    }
    Ok(())
}

/// Stratified k-fold AUROC over rows; the scaler is refitted on each training fold.
pub fn kfold_cv(x: &Matrix, y: &[u8], k: usize, cfg: &LogRegConfig, seed: u64) -> Result<CvReport> {
    check_rows(x, y)?;
    cv_over_folds(x, y, &stratified_folds(y, k, seed)?, cfg)
}

/// As [`kfold_cv`], but rows sharing a group never straddle a fold boundary.
pub fn grouped_kfold_cv(x: &Matrix, y: &[u8], groups: &[String], k: usize, cfg: &LogRegConfig, seed: u64) -> Result<CvReport> {
    check_rows(x, y)?;
    cv_over_folds(x, y, &grouped_stratified_folds(y, groups, k, seed)?, cfg)
}
