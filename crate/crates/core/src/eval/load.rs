use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::aggregate::{featurize_reader, AggregationKind, TokenFeatureSequence};
use crate::dataset::{concat_datasets, hidden_featurize, make_windows, read_dataset, HiddenOptions, WindowConfig, WindowedDataset};
use crate::trace_io::{read_hidden, sniff_magic, FileKind, TraceError, TraceReader};

/// Extension of per-trace token-feature files written by `aggregate`.
pub const FEATURE_EXT: &str = "feat.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Attention,
    Hidden,
    Features,
    Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub aggregation: AggregationKind,
    pub window: WindowConfig,
    /// Read `AHST` traces instead of attention traces.
    pub hidden: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { aggregation: AggregationKind::Sum, window: WindowConfig::default(), hidden: false }
    }
}

fn load_err(path: &Path, e: impl Into<crate::Error>) -> EvalError {
    EvalError::Load { path: path.to_path_buf(), source: Box::new(e.into()) }
}

fn io_err(path: &Path, e: std::io::Error) -> EvalError {
    load_err(path, TraceError::Io(e))
}

fn trace_id(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    name.strip_suffix(&format!(".{FEATURE_EXT}"))
        .or_else(|| name.strip_suffix(".atrc"))
        .or_else(|| name.strip_suffix(".ahst"))
        .unwrap_or(name)
        .to_string()
}

/// Input files of a directory, sorted by name. Attention traces take
/// precedence over feature files; `hidden` selects `AHST` files.
pub fn list_inputs(dir: &Path, hidden: bool) -> Result<(InputKind, Vec<PathBuf>)> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    let with = |suffix: &str| -> Vec<PathBuf> {
        files.iter().filter(|p| p.to_str().is_some_and(|s| s.ends_with(suffix))).cloned().collect()
    };
    let candidates = if hidden {
        vec![(InputKind::Hidden, with(".ahst"))]
    } else {
        vec![(InputKind::Attention, with(".atrc")), (InputKind::Features, with(&format!(".{FEATURE_EXT}")))]
    };
    candidates
        .into_iter()
        .find(|(_, list)| !list.is_empty())
        .ok_or_else(|| EvalError::Config(format!("{} holds no trace or feature files", dir.display())))
}

/// Token features of one `ATRC` file.
pub fn featurize_path(path: &Path, kind: AggregationKind) -> Result<TokenFeatureSequence> {
    let reader = TraceReader::open(path).map_err(|e| load_err(path, e))?;
    featurize_reader(reader, kind).map_err(|e| load_err(path, e))
}

fn window_file(path: &Path, kind: InputKind, opts: &LoadOptions) -> Result<WindowedDataset> {
    let id = trace_id(path);
    match kind {
        InputKind::Attention => {
            let seq = featurize_path(path, opts.aggregation)?;
            make_windows(&seq, opts.window, &id, true).map_err(|e| load_err(path, e))
        }
        InputKind::Features => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let seq: TokenFeatureSequence =
                serde_json::from_str(&text).map_err(|e| load_err(path, crate::dataset::DatasetError::Json(e)))?;
            make_windows(&seq, opts.window, &id, true).map_err(|e| load_err(path, e))
        }
        InputKind::Hidden => {
            let trace = read_hidden(path).map_err(|e| load_err(path, e))?;
            hidden_featurize(&trace, opts.window, &id, HiddenOptions::default()).map_err(|e| load_err(path, e))
        }
        InputKind::Dataset => read_dataset(path).map(|(ds, _)| ds).map_err(|e| load_err(path, e)),
    }
}

/// Loads a windowed dataset from an `AGDS` file, a single trace file, or a
/// directory of traces or feature files.
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<WindowedDataset> {
    opts.window.validate().map_err(|e| load_err(path, e))?;
    if path.is_dir() {
        let (kind, files) = list_inputs(path, opts.hidden)?;
        let parts = files.par_iter().map(|f| window_file(f, kind, opts)).collect::<Result<Vec<_>>>()?;
        return concat_datasets(&parts).map_err(|e| load_err(path, e));
    }
    let kind = if path.to_str().is_some_and(|s| s.ends_with(FEATURE_EXT)) {
        InputKind::Features
    } else {
        match sniff_magic(path).map_err(|e| load_err(path, e))? {
            FileKind::Dataset => InputKind::Dataset,
            FileKind::Attention => InputKind::Attention,
            FileKind::Hidden => InputKind::Hidden,
        }
    };
    window_file(path, kind, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::write_dataset;
    use crate::synth::{generate, write_corpus, SynthSpec};

    #[test]
    fn directory_file_and_dataset_agree() {
        let spec = SynthSpec { num_traces: 3, num_generated: [12, 20], ..SynthSpec::default() };
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&generate(&spec).unwrap(), dir.path()).unwrap();
        let opts = LoadOptions::default();
        let from_dir = load_dataset(dir.path(), &opts).unwrap();
        assert_eq!(from_dir.trace_ids(), vec!["trace_00000", "trace_00001", "trace_00002"]);

        let single = load_dataset(&dir.path().join("trace_00001.atrc"), &opts).unwrap();
        assert_eq!(single.feature_names, from_dir.feature_names);

        let agds = dir.path().join("all.agds");
        write_dataset(&agds, &from_dir, None).unwrap();
        let back = load_dataset(&agds, &opts).unwrap();
        assert_eq!(back.y, from_dir.y);
        assert_eq!(back.num_rows(), from_dir.num_rows());
    }

    #[test]
    fn empty_directory_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path(), &LoadOptions::default()), Err(EvalError::Config(_))));
    }
}
