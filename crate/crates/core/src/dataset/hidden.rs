use serde::{Deserialize, Serialize};

use super::window::windows_of;
use super::{DatasetError, Result, WindowConfig, WindowedDataset};
use crate::matrix::Matrix;
use crate::trace_io::HiddenTrace;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenOptions {
    /// Describe token `t` with the record of step `t + 1`, as the attention path does.
    pub align_shift: bool,
}

/// Window-averaged hidden states; columns are `hidden_layers × D`, named `hs{layer}_{d}`.
pub fn hidden_featurize(
    hidden: &HiddenTrace,
    cfg: WindowConfig,
    trace_id: &str,
    opts: HiddenOptions,
) -> Result<WindowedDataset> {
    let labels = hidden.header.token_labels.as_ref().ok_or(DatasetError::MissingLabels)?;
    let dim = hidden.dim();
    let layers = hidden.layers();
    let width = dim * layers.len();

    let n = hidden.records.len();
    let (offset, tokens) = if opts.align_shift { (1, n.saturating_sub(1)) } else { (0, n) };
    let mut data = Vec::with_capacity(tokens * width);
    for rec in &hidden.records[offset..offset + tokens] {
        data.extend(rec.values.iter().map(|&v| f64::from(v)));
    }
    let token_matrix = Matrix::from_vec(tokens, width, data);
    let (x, y, source_ids) = windows_of(&token_matrix, &labels[..tokens], cfg, trace_id)?;
    let feature_names =
        layers.iter().flat_map(|l| (0..dim).map(move |d| format!("hs{l}_{d}"))).collect();
    Ok(WindowedDataset { x, y, feature_names, source_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_io::{HiddenRecord, TraceHeader};

    fn trace(rows: Vec<Vec<f32>>, layers: Vec<usize>, dim: usize, labels: Vec<u8>) -> HiddenTrace {
        let n = rows.len();
        let header = TraceHeader {
            model_name: "t".into(),
            num_layers: 32,
            num_heads: 1,
            passage_len: 1,
            num_generated: n,
            input_len_at_step: vec![1; n],
            token_labels: Some(labels),
            has_hidden: true,
            hidden_dim: Some(dim),
            hidden_layers: Some(layers),
        };
        let records = rows.into_iter().enumerate().map(|(t, values)| HiddenRecord { step_index: t, values }).collect();
        HiddenTrace::new(header, records).unwrap()
    }

    #[test]
    fn window_mean_of_two_tokens() {
        let h = trace(vec![vec![1.0, 3.0], vec![3.0, 5.0]], vec![32], 2, vec![0, 0]);
        let ds = hidden_featurize(&h, WindowConfig { window_size: 2, stride: 1 }, "a", HiddenOptions::default())
            .unwrap();
        assert_eq!(ds.x.row(0), &[2.0, 4.0]);
        assert_eq!(ds.feature_names, vec!["hs32_0", "hs32_1"]);
    }

    #[test]
    fn short_trace_single_window() {
        let h = trace(vec![vec![1.0], vec![2.0], vec![6.0]], vec![32], 1, vec![0, 1, 0]);
        let ds = hidden_featurize(&h, WindowConfig::default(), "a", HiddenOptions::default()).unwrap();
        assert_eq!(ds.num_rows(), 1);
        assert_eq!(ds.x.row(0), &[3.0]);
        assert_eq!(ds.y, vec![1]);
    }

    #[test]
    fn optional_alignment() {
        let h = trace(vec![vec![1.0], vec![2.0], vec![6.0]], vec![32], 1, vec![1, 0, 0]);
        let cfg = WindowConfig { window_size: 1, stride: 1 };
        let ds = hidden_featurize(&h, cfg, "a", HiddenOptions { align_shift: true }).unwrap();
        assert_eq!(ds.x.column(0), vec![2.0, 6.0]);
        assert_eq!(ds.y, vec![1, 0]);
    }

    #[test]
    fn multi_layer_columns() {
        let h = trace(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![32, 28], 2, vec![0]);
        let ds = hidden_featurize(&h, WindowConfig::default(), "a", HiddenOptions::default()).unwrap();
        assert_eq!(ds.feature_names, vec!["hs32_0", "hs32_1", "hs28_0", "hs28_1"]);
        assert_eq!(ds.x.row(0), &[1.0, 2.0, 3.0, 4.0]);
    }
}
