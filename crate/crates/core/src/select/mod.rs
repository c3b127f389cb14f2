//! Head selection over a windowed training set.
//!
//! Selectors only look at head columns. Indices in [`SelectorResult::selected`]
//! refer to positions in [`WindowedDataset::head_columns`]; the
//! `passage_pct` column is never a candidate and is kept by
//! [`SelectorResult::keep_columns`].

mod center;
mod lasso;
mod random;
mod spearman;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, WindowedDataset};
use crate::matrix::Matrix;
use crate::model::ModelError;

pub use center::{median, select_center};
pub use lasso::select_lasso;
pub use random::select_random;
pub use spearman::{average_ranks, select_spearman, spearman_rho, spearman_with_p, SPEARMAN_ALPHA, SPEARMAN_MIN_ROWS};

#[derive(Debug, thiserror::Error)]
pub enum SelectError {
    #[error("both classes must be present in the training data")]
    SingleClass,
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("dataset has no head features")]
    NoHeads,
    #[error("selector {0} kept no heads")]
    EmptySelection(String),
    #[error("invalid selector configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub type Result<T> = std::result::Result<T, SelectError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AutoTag {
    Auto,
}

/// Spearman keep rule: a fraction of heads, or the half-of-maximum rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpearmanTargetRepr", into = "SpearmanTargetRepr")]
pub enum SpearmanTarget {
    Fraction(f64),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpearmanTargetRepr {
    Fraction(f64),
    Auto(AutoTag),
}

impl From<SpearmanTargetRepr> for SpearmanTarget {
    fn from(r: SpearmanTargetRepr) -> Self {
        match r {
            SpearmanTargetRepr::Fraction(f) => SpearmanTarget::Fraction(f),
            SpearmanTargetRepr::Auto(_) => SpearmanTarget::Auto,
        }
    }
}

impl From<SpearmanTarget> for SpearmanTargetRepr {
    fn from(t: SpearmanTarget) -> Self {
        match t {
            SpearmanTarget::Fraction(f) => SpearmanTargetRepr::Fraction(f),
            SpearmanTarget::Auto => SpearmanTargetRepr::Auto(AutoTag::Auto),
        }
    }
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorConfig {
    Center {
        r: f64,
    },
    Random {
        n: usize,
        k: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    RandomPos {
        n: usize,
        k: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Lasso {
        strength: f64,
    },
    Spearman {
        r: SpearmanTarget,
        /// Rank by signed rho (positive association with the label only).
        #[serde(default)]
        signed: bool,
    },
}

fn check_fraction(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(SelectError::InvalidConfig(format!("fraction r must lie in (0, 1], got {r}")))
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectorConfig::Center { r } => check_fraction(r),
            SelectorConfig::Spearman { r: SpearmanTarget::Fraction(r), .. } => check_fraction(r),
            SelectorConfig::Spearman { r: SpearmanTarget::Auto, .. } => Ok(()),
            SelectorConfig::Random { n, k, .. } | SelectorConfig::RandomPos { n, k, .. } => {
                if n == 0 || k == 0 || k > n {
                    Err(SelectError::InvalidConfig(format!("need 1 <= k <= n, got n={n}, k={k}")))
                } else {
                    Ok(())
                }
            }
            SelectorConfig::Lasso { strength } => {
                if strength > 0.0 && strength.is_finite() {
                    Ok(())
                } else {
                    Err(SelectError::InvalidConfig(format!("lasso strength must be positive, got {strength}")))
                }
            }
        }
    }

    /// Replaces the seed of the random-shadow selectors.
    pub fn with_seed(self, new_seed: u64) -> Self {
        match self {
            SelectorConfig::Random { n, k, .. } => SelectorConfig::Random { n, k, seed: new_seed },
            SelectorConfig::RandomPos { n, k, .. } => SelectorConfig::RandomPos { n, k, seed: new_seed },
            other => other,
        }
    }
}

impl fmt::Display for SelectorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorConfig::Center { r } => write!(f, "center:{r}"),
            SelectorConfig::Random { n, k, .. } => write!(f, "random:{n}:{k}"),
            SelectorConfig::RandomPos { n, k, .. } => write!(f, "random_pos:{n}:{k}"),
            SelectorConfig::Lasso { strength } => write!(f, "lasso:{strength}"),
            SelectorConfig::Spearman { r, signed } => {
                let sign = if *signed { ":signed" } else { "" };
                match r {
                    SpearmanTarget::Fraction(r) => write!(f, "spearman:{r}{sign}"),
                    SpearmanTarget::Auto => write!(f, "spearman:auto{sign}"),
                }
            }
        }
    }
}

/// Short form used on the command line: `center:0.5`, `random:3:3`,
/// `random_pos:3:3`, `lasso:1.0`, `spearman:0.5`, `spearman:auto[:signed]`.
impl FromStr for SelectorConfig {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SelectError::InvalidConfig(format!("cannot parse selector {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> { parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad) };
        let int = |i: usize| -> Result<usize> { parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad) };
        let cfg = match parts[0].to_ascii_lowercase().replace('-', "_").as_str() {
            "center" if parts.len() == 2 => SelectorConfig::Center { r: num(1)? },
            "random" if parts.len() == 3 => SelectorConfig::Random { n: int(1)?, k: int(2)?, seed: default_seed() },
            "random_pos" | "randompos" | "random+" if parts.len() == 3 => {
                SelectorConfig::RandomPos { n: int(1)?, k: int(2)?, seed: default_seed() }
            }
            "lasso" if parts.len() == 2 => SelectorConfig::Lasso { strength: num(1)? },
            "spearman" if parts.len() == 2 || parts.len() == 3 => {
                let signed = match parts.get(2) {
                    None => false,
                    Some(&"signed") => true,
                    Some(_) => return Err(bad()),
                };
                let r = if parts[1] == "auto" { SpearmanTarget::Auto } else { SpearmanTarget::Fraction(num(1)?) };
                SelectorConfig::Spearman { r, signed }
            }
            _ => return Err(bad()),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Per-feature scores; fields not produced by a selector are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiagnostic {
    pub feature: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coef: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

impl FeatureDiagnostic {
    fn named(feature: &str) -> Self {
        Self { feature: feature.to_string(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorResult {
    pub config: SelectorConfig,
    /// Ascending head-feature indices.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub diagnostics: Vec<FeatureDiagnostic>,
    pub fraction_kept: f64,
    /// False when an internal fit stopped at its iteration limit.
    pub converged: bool,
}

impl SelectorResult {
    fn build(config: SelectorConfig, heads: &HeadView, mut selected: Vec<usize>, diagnostics: Vec<FeatureDiagnostic>) -> Self {
        selected.sort_unstable();
        selected.dedup();
        let selected_names = selected.iter().map(|&i| heads.names[i].clone()).collect();
        let fraction_kept = selected.len() as f64 / heads.names.len() as f64;
        Self { config, selected, selected_names, diagnostics, fraction_kept, converged: true }
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Dataset columns to keep: the selected heads, then `passage_pct` if present.
    pub fn keep_columns(&self, ds: &WindowedDataset) -> Vec<usize> {
        let heads = ds.head_columns();
        let mut cols: Vec<usize> = self.selected.iter().map(|&i| heads[i]).collect();
        cols.extend(ds.passage_column());
        cols
    }
}

/// Keep-all result used when no selector is configured.
pub fn select_all(ds: &WindowedDataset) -> Result<(Vec<usize>, Vec<String>)> {
    let heads = HeadView::new(ds)?;
    Ok(((0..heads.names.len()).collect(), heads.names))
}

/// Head-only view of a dataset.
pub(crate) struct HeadView {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub names: Vec<String>,
}

impl HeadView {
    pub fn new(ds: &WindowedDataset) -> Result<Self> {
        let cols = ds.head_columns();
        if cols.is_empty() {
            return Err(SelectError::NoHeads);
        }
        let (neg, pos) = ds.class_counts();
        if neg == 0 || pos == 0 {
            return Err(SelectError::SingleClass);
        }
        ds.check_finite()?;
        Ok(Self {
            x: ds.x.select_columns(&cols),
            y: ds.y.clone(),
            names: cols.iter().map(|&c| ds.feature_names[c].clone()).collect(),
        })
    }

    pub fn num_features(&self) -> usize {
        self.names.len()
    }
}

pub fn run_selector(ds: &WindowedDataset, cfg: &SelectorConfig) -> Result<SelectorResult> {
    cfg.validate()?;
    match *cfg {
        SelectorConfig::Center { r } => select_center(ds, r),
        SelectorConfig::Random { n, k, seed } => select_random(ds, n, k, false, seed),
        SelectorConfig::RandomPos { n, k, seed } => select_random(ds, n, k, true, seed),
        SelectorConfig::Lasso { strength } => select_lasso(ds, strength),
        SelectorConfig::Spearman { r, signed } => select_spearman(ds, r, signed),
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_form_round_trip() {
        for s in ["center:0.5", "random:3:3", "random_pos:5:2", "lasso:0.25", "spearman:0.1", "spearman:auto", "spearman:auto:signed"] {
            let cfg: SelectorConfig = s.parse().unwrap();
            assert_eq!(cfg.to_string(), s);
        }
        for bad in ["center:0", "center:1.5", "random:2:3", "lasso:-1", "spearman", "bogus:1", "spearman:0.5:x"] {
            assert!(bad.parse::<SelectorConfig>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_forms() {
        let cfg: SelectorConfig = serde_json::from_str(r#"{"kind":"spearman","r":"auto"}"#).unwrap();
        assert_eq!(cfg, SelectorConfig::Spearman { r: SpearmanTarget::Auto, signed: false });
        let cfg: SelectorConfig = serde_json::from_str(r#"{"kind":"random_pos","n":3,"k":2}"#).unwrap();
        assert_eq!(cfg, SelectorConfig::RandomPos { n: 3, k: 2, seed: 42 });
        let back = serde_json::to_string(&SelectorConfig::Spearman { r: SpearmanTarget::Fraction(0.5), signed: true }).unwrap();
        assert_eq!(back, r#"{"kind":"spearman","r":0.5,"signed":true}"#);
    }

    #[test]
    fn keep_columns_appends_passage() {
        let ds = test_util::dataset(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]], &[0, 1], true);
        let heads = HeadView::new(&ds).unwrap();
        let r = SelectorResult::build(SelectorConfig::Center { r: 1.0 }, &heads, vec![2, 0], vec![]);
        assert_eq!(r.selected, vec![0, 2]);
        assert_eq!(r.keep_columns(&ds), vec![0, 2, 3]);
        assert!((r.fraction_kept - 2.0 / 3.0).abs() < 1e-15);
    }
}
