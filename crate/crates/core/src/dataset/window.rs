use std::ops::Range;

use super::{DatasetError, Result, SourceId, WindowConfig, WindowedDataset, PASSAGE_PCT};
use crate::aggregate::TokenFeatureSequence;
use crate::matrix::Matrix;

/// Number of windows for `n` tokens; a sequence shorter than the window yields one window.
pub fn window_count(n: usize, cfg: WindowConfig) -> usize {
    match n {
        0 => 0,
        n if n < cfg.window_size => 1,
        n => (n - cfg.window_size) / cfg.stride + 1,
    }
}

pub fn window_ranges(n: usize, cfg: WindowConfig) -> impl Iterator<Item = Range<usize>> {
    let count = window_count(n, cfg);
    (0..count).map(move |i| {
        let start = i * cfg.stride;
        start..(start + cfg.window_size).min(n)
    })
}

/// Window means of the token rows plus OR-ed labels.
pub(super) fn windows_of(
    tokens: &Matrix,
    labels: &[u8],
    cfg: WindowConfig,
    trace_id: &str,
) -> Result<(Matrix, Vec<u8>, Vec<SourceId>)> {
    cfg.validate()?;
    let n = tokens.nrows();
    let f = tokens.ncols();
    let count = window_count(n, cfg);
    let mut x = Matrix::zeros(count, f);
    let mut y = Vec::with_capacity(count);
    let mut ids = Vec::with_capacity(count);
    for (w, range) in window_ranges(n, cfg).enumerate() {
        let len = range.len() as f64;
        let out = x.row_mut(w);
        for t in range.clone() {
            for (o, v) in out.iter_mut().zip(tokens.row(t)) {
                *o += v;
            }
        }
        for o in out.iter_mut() {
            *o /= len;
        }
        y.push(u8::from(labels[range.clone()].contains(&1)));
        ids.push(SourceId { trace: trace_id.to_string(), start: range.start });
    }
    Ok((x, y, ids))
}

/// Windows one trace's token features. With `with_passage_pct` the passage
/// percentage becomes the last column and is averaged like the head columns.
pub fn make_windows(
    seq: &TokenFeatureSequence,
    cfg: WindowConfig,
    trace_id: &str,
    with_passage_pct: bool,
) -> Result<WindowedDataset> {
    let labels = seq.labels.as_ref().ok_or(DatasetError::MissingLabels)?;
    let tokens = if with_passage_pct { seq.features.with_column(&seq.passage_pct) } else { seq.features.clone() };
    let (x, y, source_ids) = windows_of(&tokens, labels, cfg, trace_id)?;
    let mut feature_names: Vec<String> = seq.head_ids.iter().map(ToString::to_string).collect();
    if with_passage_pct {
        feature_names.push(PASSAGE_PCT.to_string());
    }
    Ok(WindowedDataset { x, y, feature_names, source_ids })
}

/// Row-wise concatenation; every part must share the same feature names.
pub fn concat_datasets(parts: &[WindowedDataset]) -> Result<WindowedDataset> {
    let Some(first) = parts.first() else {
        return Ok(WindowedDataset::default());
    };
    let mut out = WindowedDataset {
        x: Matrix::zeros(0, first.num_features()),
        feature_names: first.feature_names.clone(),
        ..Default::default()
    };
    for (i, p) in parts.iter().enumerate() {
        if p.feature_names != first.feature_names {
            return Err(DatasetError::SchemaMismatch { first: 0, other: i });
        }
        out.x.append_rows(&p.x);
        out.y.extend_from_slice(&p.y);
        out.source_ids.extend_from_slice(&p.source_ids);
    }
    Ok(out)
}
