mod common;

use proptest::prelude::*;

use aggtruth::aggregate::{featurize, AggregationKind};
use aggtruth::dataset::{
    concat_datasets, hidden_featurize, make_windows, read_dataset, window_count, write_dataset, HiddenOptions,
    MinMaxScaler, WindowConfig,
};
use aggtruth::matrix::Matrix;
use aggtruth::trace_io::{HiddenRecord, HiddenTrace, TraceHeader};

fn cfg() -> impl Strategy<Value = WindowConfig> {
    (1usize..10, 1usize..4).prop_map(|(window_size, stride)| WindowConfig { window_size, stride })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn window_count_formula(n in 0usize..60, cfg in cfg()) {
        let expected = if n == 0 { 0 } else if n < cfg.window_size { 1 } else { (n - cfg.window_size) / cfg.stride + 1 };
        prop_assert_eq!(window_count(n, cfg), expected);
    }

    #[test]
    fn windows_match_brute_force(seed in any::<u64>(), cfg in cfg()) {
        let trace = common::random_trace(seed);
        let seq = featurize(&trace, AggregationKind::Sum).unwrap();
        let ds = make_windows(&seq, cfg, "t", true).unwrap();
        let labels = seq.labels.as_ref().unwrap();
        let n = seq.num_tokens;
        let tokens = seq.features.with_column(&seq.passage_pct);
        prop_assert_eq!(ds.num_rows(), window_count(n, cfg));
        for (w, id) in ds.source_ids.iter().enumerate() {
            let end = (id.start + cfg.window_size).min(n);
            prop_assert_eq!(id.start, w * cfg.stride);
            prop_assert_eq!(ds.y[w], u8::from(labels[id.start..end].contains(&1)));
            for j in 0..tokens.ncols() {
                let mean = (id.start..end).map(|t| tokens.get(t, j)).sum::<f64>() / (end - id.start) as f64;
                prop_assert!((ds.x.get(w, j) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaler_maps_training_matrix_into_unit_interval(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 2..30)) {
        let x = Matrix::from_rows(&rows);
        let scaled = MinMaxScaler::fit(&x).unwrap().transform(&x).unwrap();
        prop_assert!(scaled.as_slice().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn concat_commutes_with_windowing(a in any::<u64>(), b in any::<u64>()) {
        let cfg = WindowConfig::default();
        let (ta, tb) = (common::random_trace_with(a, 2, 3), common::random_trace_with(b, 2, 3));
        let wa = make_windows(&featurize(&ta, AggregationKind::Entropy).unwrap(), cfg, "a", true).unwrap();
        let wb = make_windows(&featurize(&tb, AggregationKind::Entropy).unwrap(), cfg, "b", true).unwrap();
        let joined = concat_datasets(&[wa.clone(), wb.clone()]).unwrap();
        prop_assert_eq!(joined.num_rows(), wa.num_rows() + wb.num_rows());
        let rows_a: Vec<usize> = (0..wa.num_rows()).collect();
        prop_assert_eq!(joined.select_rows(&rows_a), wa.clone());
        let rows_b: Vec<usize> = (wa.num_rows()..joined.num_rows()).collect();
        prop_assert_eq!(joined.select_rows(&rows_b), wb);
    }
}

#[test]
fn scaler_examples() {
    let train = Matrix::from_rows(&[vec![2.0, 5.0], vec![4.0, 5.0], vec![6.0, 5.0]]);
    let s = MinMaxScaler::fit(&train).unwrap();
    assert_eq!(s.transform(&train).unwrap().column(0), vec![0.0, 0.5, 1.0]);
    assert_eq!(s.transform(&train).unwrap().column(1), vec![0.0; 3]);
    assert_eq!(s.transform(&Matrix::from_rows(&[vec![8.0, 9.0]])).unwrap().row(0)[0], 1.5);
}

#[test]
fn agds_round_trip_keeps_f32_values() {
    let dir = tempfile::tempdir().unwrap();
    let parts: Vec<_> = (0..5)
        .map(|s| {
            let seq = featurize(&common::random_trace_with(s, 3, 2), AggregationKind::JsDiv).unwrap();
            make_windows(&seq, WindowConfig::default(), &format!("t{s}"), true).unwrap()
        })
        .collect();
    let ds = concat_datasets(&parts).unwrap();
    let scaler = MinMaxScaler::fit_dataset(&ds).ok();
    let path = dir.path().join("d.agds");
    write_dataset(&path, &ds, scaler.as_ref()).unwrap();
    let (back, back_scaler) = read_dataset(&path).unwrap();
    assert_eq!(back.y, ds.y);
    assert_eq!(back.feature_names, ds.feature_names);
    assert_eq!(back.source_ids, ds.source_ids);
    assert_eq!(back_scaler, scaler);
    for (a, b) in back.x.as_slice().iter().zip(ds.x.as_slice()) {
        assert_eq!(*a, f64::from(*b as f32));
    }
}

#[test]
fn hidden_windows_are_plain_means() {
    let n = 11;
    let header = TraceHeader {
        model_name: "h".into(),
        num_layers: 8,
        num_heads: 1,
        passage_len: 1,
        num_generated: n,
        input_len_at_step: vec![3; n],
        token_labels: Some((0..n).map(|t| u8::from(t % 5 == 0)).collect()),
        has_hidden: true,
        hidden_dim: Some(3),
        hidden_layers: Some(vec![7, 3]),
    };
    let records: Vec<HiddenRecord> = (0..n)
        .map(|t| HiddenRecord { step_index: t, values: (0..6).map(|i| ((t * 7 + i * 3) % 13) as f32).collect() })
        .collect();
    let trace = HiddenTrace::new(header, records.clone()).unwrap();
    let cfg = WindowConfig { window_size: 4, stride: 2 };
    let ds = hidden_featurize(&trace, cfg, "h", HiddenOptions::default()).unwrap();
    assert_eq!(ds.num_rows(), window_count(n, cfg));
    assert_eq!(ds.feature_names[3], "hs3_0");
    for w in 0..ds.num_rows() {
        let range = 2 * w..2 * w + 4;
        for j in 0..6 {
            let mean = range.clone().map(|t| f64::from(records[t].values[j])).sum::<f64>() / 4.0;
            assert!((ds.x.get(w, j) - mean).abs() < 1e-12);
        }
        assert_eq!(ds.y[w], u8::from(range.clone().any(|t| t % 5 == 0)));
    }
}
