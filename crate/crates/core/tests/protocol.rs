mod common;

use aggtruth::aggregate::AggregationKind;
use aggtruth::dataset::WindowConfig;
use aggtruth::eval::{
    run_protocol, run_protocol_data, sweep_selectors, ProtocolConfig, ProtocolData, ProtocolSettings,
};
use aggtruth::select::{SelectorConfig, SpearmanTarget};
use aggtruth::synth::{generate, write_corpus, SynthSpec};

/// Source train / source test / two targets as trace ranges of one corpus.
fn protocol_data(spec: &SynthSpec, sizes: [usize; 4]) -> ProtocolData {
    let corpus = generate(&SynthSpec { num_traces: sizes.iter().sum(), ..spec.clone() }).unwrap();
    let mut start = 0;
    let mut parts = sizes.iter().map(|&n| {
        let ds = common::windows(&corpus.traces[start..start + n], AggregationKind::Sum, WindowConfig::default());
        start += n;
        ds
    });
    ProtocolData {
        source_train: parts.next().unwrap(),
        source_test: parts.next(),
        target_1: parts.next().unwrap(),
        target_2: parts.next().unwrap(),
    }
}

fn spearman(r: f64) -> Option<SelectorConfig> {
    Some(SelectorConfig::Spearman { r: SpearmanTarget::Fraction(r), signed: false })
}

#[test]
fn iid_targets_track_source_test() {
    let spec = SynthSpec { effect_size: 0.1, seed: 4, ..SynthSpec::default() };
    let data = protocol_data(&spec, [120, 80, 80, 80]);
    let report = run_protocol_data(&data, &ProtocolSettings::default()).unwrap().1;
    assert!(report.test > 0.6 && report.test < 0.99, "signal should be partial: {}", report.test);
    for target in [report.test_1, report.test_2] {
        assert!((target - report.test).abs() <= 0.05, "{report:?}");
    }
}

#[test]
fn null_run_held_out_columns_sit_at_chance() {
    let seeds = 0..6u64;
    let mut sums = [0.0; 4];
    for seed in seeds.clone() {
        let spec = SynthSpec { effect_size: 0.0, seed, ..SynthSpec::default() };
        let r = run_protocol_data(&protocol_data(&spec, [120, 60, 60, 60]), &ProtocolSettings::default()).unwrap().1;
        for (s, v) in sums.iter_mut().zip([r.val, r.test, r.test_1, r.test_2]) {
            *s += v;
        }
        // in-sample fit on correlated windows is optimistic, but not wildly so
        assert!(r.train < 0.7, "seed {seed}: train {}", r.train);
    }
    let n = seeds.count() as f64;
    for (name, s) in ["val", "test", "test_1", "test_2"].iter().zip(sums) {
        let mean = s / n;
        eprintln!("null {name} mean {mean:.3}");
        assert!((0.45..=0.55).contains(&mean), "{name} mean {mean}");
    }
}

#[test]
fn sweep_over_fractions_and_isolated_failure() {
    let spec = SynthSpec { seed: 7, effect_size: 0.15, ..SynthSpec::default() };
    // the source test set comes from the sweep's own 80/20 split
    let data = ProtocolData { source_test: None, ..protocol_data(&spec, [100, 1, 40, 40]) };
    let grid = [spearman(0.1), spearman(0.5), spearman(1.0), Some(SelectorConfig::Lasso { strength: 1e6 })];
    let sweep = sweep_selectors(&data, &ProtocolSettings::default(), &grid).unwrap();
    assert_eq!(sweep.cells.len(), 4);
    assert_eq!(sweep.reports().count(), 3);
    let failed: Vec<_> = sweep.cells.iter().filter(|c| c.error.is_some()).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].method.starts_with("lasso"));
    let by_method = |m: &str| sweep.reports().find(|r| r.method == m).unwrap();
    let (half, full) = (by_method("spearman:0.5"), by_method("spearman:1"));
    assert!((half.test - full.test).abs() <= 0.05, "{} vs {}", half.test, full.test);
    // every successful cell was scored on the same source split
    let rows: Vec<_> = sweep.reports().map(|r| r.rows).collect();
    assert!(rows.windows(2).all(|w| w[0] == w[1]));
    assert!(sweep.reports().all(|r| r.gap.is_some_and(|g| g >= 0.0)));
    assert!(sweep.table().contains("spearman:0.5"));
}

#[test]
fn file_protocol_is_deterministic_and_leak_free() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (name, seed, n, delta) in [("train", 1, 40, 0.5), ("t1", 2, 15, 0.5), ("t2", 3, 15, 0.5), ("noise", 4, 15, 0.0)] {
        let corpus = generate(&SynthSpec { num_traces: n, seed, effect_size: delta, ..SynthSpec::default() }).unwrap();
        let path = dir.path().join(name);
        write_corpus(&corpus, &path).unwrap();
        paths.push(path);
    }
    let cfg = |t2: usize| ProtocolConfig {
        source_train: paths[0].clone(),
        source_test: None,
        target_test_1: paths[1].clone(),
        target_test_2: paths[t2].clone(),
        settings: ProtocolSettings { selector: spearman(0.5), ..ProtocolSettings::default() },
    };
    let (fit_a, rep_a) = run_protocol(&cfg(2)).unwrap();
    let (fit_b, rep_b) = run_protocol(&cfg(2)).unwrap();
    assert_eq!(serde_json::to_string(&rep_a).unwrap(), serde_json::to_string(&rep_b).unwrap());
    assert_eq!(fit_a.checksum(), fit_b.checksum());
    let (fit_noise, _) = run_protocol(&cfg(3)).unwrap();
    assert_eq!(fit_noise.checksum(), fit_a.checksum());
}
