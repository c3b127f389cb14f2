mod common;

use aggtruth::aggregate::AggregationKind;
use aggtruth::dataset::WindowConfig;
use aggtruth::select::{select_random, select_spearman, SpearmanTarget};
use aggtruth::synth::{generate, write_corpus, SignalMode, SynthSpec, MANIFEST_FILE};
use aggtruth::trace_io::{read_hidden, read_trace};

fn small(seed: u64) -> SynthSpec {
    SynthSpec { num_traces: 12, seed, ..SynthSpec::default() }
}

#[test]
fn written_corpus_reads_back_valid() {
    let spec = SynthSpec { hidden_dim: Some(16), mode: SignalMode::MassAndConcentration, ..small(3) };
    let corpus = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(&corpus, dir.path()).unwrap();
    assert!(dir.path().join(MANIFEST_FILE).exists());
    assert_eq!(manifest.traces.len(), 12);
    for (entry, trace) in manifest.traces.iter().zip(&corpus.traces) {
        let back = read_trace(dir.path().join(&entry.attention_file)).unwrap();
        assert_eq!(back, trace.attention);
        let hidden = read_hidden(dir.path().join(entry.hidden_file.as_ref().unwrap())).unwrap();
        assert_eq!(Some(hidden), trace.hidden);
        let labels = back.header.token_labels.unwrap();
        assert_eq!(entry.hallucinated_tokens, labels.iter().filter(|&&l| l == 1).count());
    }
}

#[test]
fn same_seed_same_bits() {
    let a = generate(&small(8)).unwrap();
    let b = generate(&small(8)).unwrap();
    assert_eq!(a.signal_heads, b.signal_heads);
    for (x, y) in a.traces.iter().zip(&b.traces) {
        assert_eq!(x.attention.header, y.attention.header);
        for (r, s) in x.attention.records.iter().zip(&y.attention.records) {
            assert!(r.values.iter().zip(&s.values).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
    assert_ne!(generate(&small(9)).unwrap().traces[0].attention, a.traces[0].attention);
}

#[test]
fn label_rate_converges() {
    let spec = SynthSpec { num_traces: 1700, num_generated: [50, 70], layers: [1, 1], heads: [2, 2], passage_len: [4, 4], ..SynthSpec::default() };
    let corpus = generate(&spec).unwrap();
    let (ones, total) = corpus.traces.iter().fold((0usize, 0usize), |(o, t), tr| {
        let l = tr.attention.header.token_labels.as_ref().unwrap();
        (o + l.iter().filter(|&&v| v == 1).count(), t + l.len())
    });
    assert!(total >= 100_000, "{total} tokens");
    let rate = ones as f64 / total as f64;
    assert!((rate - spec.hallucination_rate).abs() <= 0.02, "rate {rate}");
}

#[test]
fn invalid_specs_are_rejected() {
    for bad in [
        SynthSpec { effect_size: 1.0, ..SynthSpec::default() },
        SynthSpec { hallucination_rate: 1.5, ..SynthSpec::default() },
        SynthSpec { signal_heads: -0.1, ..SynthSpec::default() },
        SynthSpec { layers: [3, 2], ..SynthSpec::default() },
    ] {
        assert!(generate(&bad).is_err(), "{bad:?}");
    }
}

#[test]
fn selectors_recover_planted_heads() {
    let (mut spearman, mut positive) = (0.0, 0.0);
    for seed in 0..10 {
        let spec = SynthSpec { num_traces: 60, seed, ..SynthSpec::default() };
        let corpus = generate(&spec).unwrap();
        let ds = common::windows(&corpus.traces, AggregationKind::Sum, WindowConfig::default());
        let signal = corpus.signal_indices();
        let recovered = |sel: &[usize]| signal.iter().filter(|j| sel.contains(j)).count() as f64 / signal.len() as f64;
        spearman += recovered(&select_spearman(&ds, SpearmanTarget::Fraction(spec.signal_heads), false).unwrap().selected);
        positive += recovered(&select_random(&ds, 3, 3, true, seed).unwrap().selected);
    }
    eprintln!("recovery: spearman {:.3}, random+ {:.3}", spearman / 10.0, positive / 10.0);
    assert!(spearman / 10.0 >= 0.8, "spearman recovery {}", spearman / 10.0);
    assert!(positive / 10.0 >= 0.8, "random+ recovery {}", positive / 10.0);
}
