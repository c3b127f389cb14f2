#![allow(dead_code)]

use aggtruth::aggregate::{featurize, AggregationKind};
use aggtruth::dataset::{concat_datasets, make_windows, WindowConfig, WindowedDataset};
use aggtruth::synth::{SyntheticCorpus, SyntheticTrace};

pub fn windows(traces: &[SyntheticTrace], kind: AggregationKind, cfg: WindowConfig) -> WindowedDataset {
    let parts: Vec<WindowedDataset> = traces
        .iter()
        .map(|t| make_windows(&featurize(&t.attention, kind).unwrap(), cfg, &t.id, true).unwrap())
        .collect();
    concat_datasets(&parts).unwrap()
}

/// First `n_train` traces for training, the rest for testing.
pub fn split(corpus: &SyntheticCorpus, n_train: usize, kind: AggregationKind) -> (WindowedDataset, WindowedDataset) {
    let cfg = WindowConfig::default();
    (windows(&corpus.traces[..n_train], kind, cfg), windows(&corpus.traces[n_train..], kind, cfg))
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aggtruth::dataset::SourceId;
use aggtruth::matrix::Matrix;
use aggtruth::trace_io::{AttentionTrace, TokenAttentionRecord, TraceHeader};

/// Valid random trace with `L ≤ 4, H ∈ [2,4], C ≤ 16, N ≤ 12`, rows summing to at most one.
pub fn random_trace(seed: u64) -> AttentionTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    random_trace_with(seed, rng.random_range(1..=4), rng.random_range(2..=4))
}

/// As [`random_trace`] with `L` and `H` fixed.
pub fn random_trace_with(seed: u64, l: usize, h: usize) -> AttentionTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, n) = (rng.random_range(1..=16), rng.random_range(0..=12));
    let prompt = c + rng.random_range(0..20);
    let header = TraceHeader {
        model_name: "random".into(),
        num_layers: l,
        num_heads: h,
        passage_len: c,
        num_generated: n,
        input_len_at_step: (0..n).map(|t| prompt + t).collect(),
        token_labels: Some((0..n).map(|_| rng.random_range(0..2)).collect()),
        has_hidden: false,
        hidden_dim: None,
        hidden_layers: None,
    };
    let records = (0..n)
        .map(|step| {
            let values = (0..l * h)
                .flat_map(|_| {
                    let w: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
                    let total: f64 = w.iter().sum();
                    let mass = rng.random::<f64>();
                    w.into_iter().map(move |v| (v / total * mass) as f32).collect::<Vec<f32>>()
                })
                .collect();
            TokenAttentionRecord { step_index: step, values }
        })
        .collect();
    AttentionTrace::new(header, records).unwrap()
}

/// Dataset built from explicit columns, one trace per `group` rows.
pub fn dataset(columns: &[Vec<f64>], y: &[u8], group: usize) -> WindowedDataset {
    let rows = y.len();
    let x = Matrix::from_vec(rows, columns.len(), (0..rows).flat_map(|i| columns.iter().map(move |c| c[i])).collect());
    WindowedDataset {
        x,
        y: y.to_vec(),
        feature_names: (0..columns.len()).map(|j| format!("l0h{j}")).collect(),
        source_ids: (0..rows).map(|i| SourceId { trace: format!("t{}", i / group.max(1)), start: i % group.max(1) }).collect(),
    }
}
