use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::load::{load_dataset, LoadOptions};
use super::{EvalError, Result, Stage};
use crate::aggregate::AggregationKind;
use crate::dataset::{DatasetError, MinMaxScaler, WindowConfig, WindowedDataset};
use crate::model::{
    auroc, grouped_kfold_cv, kfold_cv, predict_proba, train_logreg, CvReport, LogRegConfig, LogRegModel, ModelError,
};
use crate::select::{run_selector, select_all, SelectError, SelectorConfig, SelectorResult};

fn default_folds() -> usize {
    5
}

fn default_split() -> f64 {
    0.8
}

fn default_seed() -> u64 {
    42
}

/// Everything except the input paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    #[serde(default)]
    pub aggregation: AggregationKind,
    #[serde(default)]
    pub hidden: bool,
    #[serde(default)]
    pub selector: Option<SelectorConfig>,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    /// Fraction of source traces kept for training when no source test set is given.
    #[serde(default = "default_split")]
    pub source_split: f64,
    #[serde(default)]
    pub logreg: LogRegConfig,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            aggregation: AggregationKind::default(),
            hidden: false,
            selector: None,
            window: WindowConfig::default(),
            seed: default_seed(),
            cv_folds: default_folds(),
            source_split: default_split(),
            logreg: LogRegConfig::default(),
        }
    }
}

impl ProtocolSettings {
    pub fn validate(&self) -> Result<()> {
        if self.cv_folds < 2 {
            return Err(EvalError::Config(format!("cv_folds must be >= 2, got {}", self.cv_folds)));
        }
        if !(self.source_split > 0.0 && self.source_split < 1.0) {
            return Err(EvalError::Config(format!("source_split must lie in (0, 1), got {}", self.source_split)));
        }
        if let Some(sel) = &self.selector {
            sel.validate().map_err(|e| EvalError::Config(e.to_string()))?;
        }
        self.window.validate().map_err(|e| EvalError::Config(e.to_string()))
    }

    pub fn method_name(&self) -> String {
        self.selector.map_or_else(|| "all".to_string(), |s| s.to_string())
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions { aggregation: self.aggregation, window: self.window, hidden: self.hidden }
    }
}

/// Dataset paths plus settings. Each path is an `AGDS` file, a trace file or a directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub source_train: PathBuf,
    /// Split from `source_train` by trace when absent.
    #[serde(default)]
    pub source_test: Option<PathBuf>,
    pub target_test_1: PathBuf,
    pub target_test_2: PathBuf,
    #[serde(flatten)]
    pub settings: ProtocolSettings,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let mut paths = vec![&self.source_train, &self.target_test_1, &self.target_test_2];
        paths.extend(self.source_test.as_ref());
        let distinct: BTreeSet<_> = paths.iter().collect();
        if distinct.len() != paths.len() {
            return Err(EvalError::Config("dataset paths must be distinct".into()));
        }
        self.settings.validate()
    }

    pub fn load(&self) -> Result<ProtocolData> {
        self.validate()?;
        let opts = self.settings.load_options();
        let source_test = match &self.source_test {
            Some(p) => Some(load_dataset(p, &opts)?),
            None => None,
        };
        Ok(ProtocolData {
            source_train: load_dataset(&self.source_train, &opts)?,
            source_test,
            target_1: load_dataset(&self.target_test_1, &opts)?,
            target_2: load_dataset(&self.target_test_2, &opts)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolData {
    pub source_train: WindowedDataset,
    pub source_test: Option<WindowedDataset>,
    pub target_1: WindowedDataset,
    pub target_2: WindowedDataset,
}

impl ProtocolData {
    /// Resolves the source test set, splitting source-train by trace if needed.
    pub fn with_source_split(&self, settings: &ProtocolSettings) -> Result<ProtocolData> {
        if self.source_test.is_some() {
            return Ok(self.clone());
        }
        let (train, test) = split_by_trace(&self.source_train, settings.source_split, settings.seed)?;
        Ok(ProtocolData { source_train: train, source_test: Some(test), ..self.clone() })
    }
}

/// Trace-level split, stratified on whether a trace has any positive window.
/// Returns `(train, test)`; each stratum with at least two traces puts at least one in each part.
pub fn split_by_trace(ds: &WindowedDataset, train_fraction: f64, seed: u64) -> Result<(WindowedDataset, WindowedDataset)> {
    if ds.source_ids.len() != ds.num_rows() {
        return Err(EvalError::at(Stage::Split)(DatasetError::Format("rows lack source trace ids".into())));
    }
    let ids = ds.trace_ids();
    let positive: BTreeSet<&str> =
        ds.source_ids.iter().zip(&ds.y).filter(|(_, &y)| y == 1).map(|(s, _)| s.trace.as_str()).collect();
    let mut test_ids = BTreeSet::new();
    for (stratum, has_positive) in [false, true].into_iter().enumerate() {
        let mut group: Vec<&String> = ids.iter().filter(|id| positive.contains(id.as_str()) == has_positive).collect();
        let mut rng = crate::rng::substream(seed, 100 + stratum as u64);
        group.shuffle(&mut rng);
        let n = group.len();
        let n_test = if n < 2 { 0 } else { (((1.0 - train_fraction) * n as f64).round() as usize).clamp(1, n - 1) };
        test_ids.extend(group.into_iter().take(n_test).map(String::as_str));
    }
    let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
    for (i, s) in ds.source_ids.iter().enumerate() {
        if test_ids.contains(s.trace.as_str()) {
            test_rows.push(i);
        } else {
            train_rows.push(i);
        }
    }
    Ok((ds.select_rows(&train_rows), ds.select_rows(&test_rows)))
}

/// Fitted scaler, head selection and classifier; all derived from source-train alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    /// Column schema the pipeline expects.
    pub feature_names: Vec<String>,
    pub kept_columns: Vec<usize>,
    pub kept_names: Vec<String>,
    pub heads_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectorResult>,
    pub scaler: MinMaxScaler,
    pub model: LogRegModel,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl FittedPipeline {
    /// FNV-1a over the canonical JSON of the fitted state.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_vec(self).expect("pipeline serializes");
        let hash = json.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME));
        format!("{hash:016x}")
    }

    pub fn score(&self, ds: &WindowedDataset) -> Result<Vec<f64>> {
        if ds.feature_names != self.feature_names {
            return Err(EvalError::at(Stage::Score)(DatasetError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: ds.feature_names.len(),
            }));
        }
        let x = self.scaler.transform(&ds.x.select_columns(&self.kept_columns)).map_err(EvalError::at(Stage::Score))?;
        predict_proba(&self.model, &x).map_err(EvalError::at(Stage::Score))
    }

    pub fn auroc(&self, ds: &WindowedDataset) -> Result<f64> {
        let scores = self.score(ds)?;
        auroc(&scores, &ds.y).map_err(EvalError::at(Stage::Score))
    }
}

pub fn fit_pipeline(train: &WindowedDataset, selector: Option<&SelectorConfig>, logreg: &LogRegConfig) -> Result<FittedPipeline> {
    if train.is_empty() {
        return Err(EvalError::at(Stage::Select)(DatasetError::Empty));
    }
    let (kept_columns, selection, heads_pct) = match selector {
        None => {
            select_all(train).map_err(EvalError::at(Stage::Select))?;
            let mut cols = train.head_columns();
            cols.extend(train.passage_column());
            (cols, None, 100.0)
        }
        Some(cfg) => {
            let result = run_selector(train, cfg).map_err(EvalError::at(Stage::Select))?;
            if result.is_empty() {
                return Err(EvalError::at(Stage::Select)(SelectError::EmptySelection(cfg.to_string())));
            }
            let pct = result.fraction_kept * 100.0;
            (result.keep_columns(train), Some(result), pct)
        }
    };
    let x = train.x.select_columns(&kept_columns);
    let scaler = MinMaxScaler::fit(&x).map_err(EvalError::at(Stage::Scale))?;
    let scaled = scaler.transform(&x).map_err(EvalError::at(Stage::Scale))?;
    let model = train_logreg(&scaled, &train.y, logreg).map_err(EvalError::at(Stage::Train))?;
    Ok(FittedPipeline {
        feature_names: train.feature_names.clone(),
        kept_names: kept_columns.iter().map(|&c| train.feature_names[c].clone()).collect(),
        kept_columns,
        heads_pct,
        selection,
        scaler,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub train: usize,
    pub test: usize,
    pub target_1: usize,
    pub target_2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub heads_pct: f64,
    pub selected_heads: Vec<String>,
    pub train: f64,
    /// Mean CV AUROC on source-train.
    pub val: f64,
    pub val_std: f64,
    pub val_folds: Vec<f64>,
    pub test: f64,
    pub test_1: f64,
    pub test_2: f64,
    /// Filled in when the report is part of a method set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub converged: bool,
    pub rows: RowCounts,
    pub pipeline_checksum: String,
    pub config: ProtocolSettings,
}

impl EvaluationReport {
    pub fn test_triple(&self) -> [f64; 3] {
        [self.test, self.test_1, self.test_2]
    }
}

/// Folds keep each trace whole so overlapping windows never straddle train and
/// held-out rows. Row-level folds are the fallback when traces are unknown or
/// too few traces carry a positive window to fill every fold.
fn cross_validate(x: &crate::matrix::Matrix, ds: &WindowedDataset, settings: &ProtocolSettings) -> crate::model::Result<CvReport> {
    let (k, cfg, seed) = (settings.cv_folds, &settings.logreg, settings.seed);
    if ds.source_ids.len() == ds.num_rows() {
        let groups: Vec<String> = ds.source_ids.iter().map(|s| s.trace.clone()).collect();
        match grouped_kfold_cv(x, &ds.y, &groups, k, cfg, seed) {
            Err(ModelError::ClassTooSmall { .. }) => {}
            other => return other,
        }
    }
    kfold_cv(x, &ds.y, k, cfg, seed)
}

/// Scores a fitted pipeline; the CV column is recomputed from `data.source_train`.
pub fn evaluate_fitted(pipeline: &FittedPipeline, data: &ProtocolData, settings: &ProtocolSettings) -> Result<EvaluationReport> {
    let source_test = data
        .source_test
        .as_ref()
        .ok_or_else(|| EvalError::Config("source test set not resolved".into()))?;
    let train_x = data.source_train.x.select_columns(&pipeline.kept_columns);
    let cv = cross_validate(&train_x, &data.source_train, settings).map_err(EvalError::at(Stage::Validate))?;
    let selected_heads = pipeline
        .kept_names
        .iter()
        .filter(|n| n.as_str() != crate::dataset::PASSAGE_PCT)
        .cloned()
        .collect();
    Ok(EvaluationReport {
        method: settings.method_name(),
        heads_pct: pipeline.heads_pct,
        selected_heads,
        train: pipeline.auroc(&data.source_train)?,
        val: cv.mean,
        val_std: cv.std,
        val_folds: cv.fold_aurocs,
        test: pipeline.auroc(source_test)?,
        test_1: pipeline.auroc(&data.target_1)?,
        test_2: pipeline.auroc(&data.target_2)?,
        gap: None,
        converged: pipeline.model.converged && pipeline.selection.as_ref().is_none_or(|s| s.converged),
        rows: RowCounts {
            train: data.source_train.num_rows(),
            test: source_test.num_rows(),
            target_1: data.target_1.num_rows(),
            target_2: data.target_2.num_rows(),
        },
        pipeline_checksum: pipeline.checksum(),
        config: settings.clone(),
    })
}

/// Fits on source-train, cross-validates, scores the three test sets.
pub fn run_protocol_data(data: &ProtocolData, settings: &ProtocolSettings) -> Result<(FittedPipeline, EvaluationReport)> {
    settings.validate()?;
    let data = data.with_source_split(settings)?;
    let pipeline = fit_pipeline(&data.source_train, settings.selector.as_ref(), &settings.logreg)?;
    let report = evaluate_fitted(&pipeline, &data, settings)?;
    Ok((pipeline, report))
}

pub fn run_protocol(cfg: &ProtocolConfig) -> Result<(FittedPipeline, EvaluationReport)> {
    let data = cfg.load()?;
    run_protocol_data(&data, &cfg.settings)
}
