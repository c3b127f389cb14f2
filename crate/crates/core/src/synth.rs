//! Synthetic attention traces with a planted hallucination signal.
//!
//! Each head has a characteristic passage mass and attention profile shared
//! across the corpus. On a hallucinated token `t`, the rows of the signal
//! heads in record `t + 1` lose a fraction `effect_size` of their passage
//! mass (the residual grows). In [`SignalMode::MassAndConcentration`] the
//! passage distribution of those rows is also flattened toward uniform by the
//! same fraction. Labels come in contiguous spans generated by a two-state
//! Markov chain whose stationary rate is `hallucination_rate`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::HeadId;
use crate::trace_io::{
    write_hidden, write_trace, AttentionTrace, HiddenRecord, HiddenTrace, TokenAttentionRecord, TraceError, TraceHeader,
};

/// Upper bound on a row's passage mass, so f32 rounding never breaks the ≤ 1 invariant.
const MAX_MASS: f64 = 0.99;
const MIN_MASS: f64 = 1e-3;
/// Number of hidden dimensions shifted on hallucinated tokens.
const HIDDEN_SIGNAL_DIMS: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    #[default]
    Mass,
    MassAndConcentration,
}

/// Generator parameters. Ranges are inclusive `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub num_traces: usize,
    pub layers: [usize; 2],
    pub heads: [usize; 2],
    /// Passage length C.
    pub passage_len: [usize; 2],
    /// Generated tokens N.
    pub num_generated: [usize; 2],
    /// Prompt tokens besides the passage.
    pub prompt_extra: [usize; 2],
    pub hallucination_rate: f64,
    /// Mean length of a hallucinated span, in tokens.
    pub mean_span: f64,
    /// Fraction of the L·H heads carrying the signal.
    pub signal_heads: f64,
    /// Relative passage-mass reduction δ on hallucinated steps.
    pub effect_size: f64,
    pub mode: SignalMode,
    /// Range of per-head characteristic passage mass.
    pub base_mass: [f64; 2],
    /// Standard deviation of the per-trace shift of each head's mass.
    pub trace_jitter: f64,
    /// Standard deviation of the per-step mass noise.
    pub step_noise: f64,
    pub hidden_dim: Option<usize>,
    pub seed: u64,
    pub model_name: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_traces: 100,
            layers: [4, 4],
            heads: [8, 8],
            passage_len: [16, 48],
            num_generated: [40, 80],
            prompt_extra: [8, 32],
            hallucination_rate: 0.2,
            mean_span: 4.0,
            signal_heads: 0.5,
            effect_size: 0.5,
            mode: SignalMode::Mass,
            base_mass: [0.4, 0.9],
            trace_jitter: 0.03,
            step_noise: 0.05,
            hidden_dim: None,
            seed: 42,
            model_name: "synthetic".to_string(),
        }
    }
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn range(name: &str, r: [usize; 2], min: usize) -> Result<()> {
    if r[0] < min || r[0] > r[1] {
        Err(SynthError::InvalidSpec(format!("{name} range {r:?} must satisfy {min} <= min <= max")))
    } else {
        Ok(())
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("{name} must be a finite non-negative number, got {v}")))
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        range("layers", self.layers, 1)?;
        range("heads", self.heads, 1)?;
        range("passage_len", self.passage_len, 1)?;
        range("num_generated", self.num_generated, 1)?;
        range("prompt_extra", self.prompt_extra, 0)?;
        fraction("hallucination_rate", self.hallucination_rate)?;
        fraction("signal_heads", self.signal_heads)?;
        if !(0.0..1.0).contains(&self.effect_size) {
            return Err(SynthError::InvalidSpec(format!("effect_size must lie in [0, 1), got {}", self.effect_size)));
        }
        if !(self.mean_span >= 1.0 && self.mean_span.is_finite()) {
            return Err(SynthError::InvalidSpec(format!("mean_span must be >= 1, got {}", self.mean_span)));
        }
        if self.enter_probability() > 1.0 {
            return Err(SynthError::InvalidSpec(format!(
                "hallucination_rate {} is unreachable with mean_span {}; need rate <= mean_span / (mean_span + 1)",
                self.hallucination_rate, self.mean_span
            )));
        }
        let [lo, hi] = self.base_mass;
        if !(MIN_MASS..=MAX_MASS).contains(&lo) || !(lo..=MAX_MASS).contains(&hi) {
            return Err(SynthError::InvalidSpec(format!(
                "base_mass {:?} must satisfy {MIN_MASS} <= min <= max <= {MAX_MASS}",
                self.base_mass
            )));
        }
        non_negative("trace_jitter", self.trace_jitter)?;
        non_negative("step_noise", self.step_noise)?;
        if self.hidden_dim == Some(0) {
            return Err(SynthError::InvalidSpec("hidden_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// P(clean → hallucinated); the leave probability is 1 / mean_span.
    fn enter_probability(&self) -> f64 {
        let rate = self.hallucination_rate;
        if rate >= 1.0 {
            return 1.0;
        }
        rate / (self.mean_span * (1.0 - rate))
    }
}

/// Corpus-level head characteristics.
#[derive(Debug, Clone)]
struct HeadProfile {
    mass: f64,
    /// Unnormalised Dirichlet concentration used for the passage profile.
    concentration: f64,
    signal: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    pub id: String,
    pub attention: AttentionTrace,
    pub hidden: Option<HiddenTrace>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: SynthSpec,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Heads carrying the planted signal, in feature order.
    pub signal_heads: Vec<HeadId>,
    pub traces: Vec<SyntheticTrace>,
}

impl SyntheticCorpus {
    /// Flat feature indices (`layer * H + head`) of the signal heads.
    pub fn signal_indices(&self) -> Vec<usize> {
        self.signal_heads.iter().map(|h| h.layer * self.num_heads + h.head).collect()
    }
}

fn uniform_usize(rng: &mut ChaCha8Rng, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1])
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Markov span labels with stationary rate `hallucination_rate`.
pub(crate) fn span_labels(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let rate = spec.hallucination_rate;
    let enter = spec.enter_probability();
    let leave = 1.0 / spec.mean_span;
    let mut state = rng.random::<f64>() < rate;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(u8::from(state));
        let u = rng.random::<f64>();
        state = if state { u >= leave } else { u < enter };
    }
    labels
}

fn passage_profile(rng: &mut ChaCha8Rng, concentration: f64, c: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("concentration is positive");
    let mut w: Vec<f64> = (0..c).map(|_| gamma.sample(rng).max(1e-12)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn generate_trace(spec: &SynthSpec, index: usize, layers: usize, heads: usize, profiles: &[HeadProfile]) -> Result<SyntheticTrace> {
    let mut rng = crate::rng::substream(spec.seed, index as u64 + 1);
    let c = uniform_usize(&mut rng, spec.passage_len);
    let n = uniform_usize(&mut rng, spec.num_generated);
    let prompt = c + uniform_usize(&mut rng, spec.prompt_extra);
    let labels = span_labels(spec, n, &mut rng);

    // per trace: each head's mass shifts slightly and its profile is redrawn for this passage
    let trace_heads: Vec<(f64, Vec<f64>)> = profiles
        .iter()
        .map(|p| {
            let mass = p.mass + spec.trace_jitter * normal(&mut rng);
            (mass, passage_profile(&mut rng, p.concentration, c))
        })
        .collect();

    let uniform = 1.0 / c as f64;
    let mut records = Vec::with_capacity(n);
    for step in 0..n {
        // record `step` describes token `step - 1`
        let hallucinated = step > 0 && labels[step - 1] == 1;
        let mut values = Vec::with_capacity(layers * heads * c);
        for (profile, (base, shape)) in profiles.iter().zip(&trace_heads) {
            let mut mass = (base + spec.step_noise * normal(&mut rng)).clamp(MIN_MASS, MAX_MASS);
            let mut flatten = 0.0;
            if hallucinated && profile.signal {
                mass *= 1.0 - spec.effect_size;
                if spec.mode == SignalMode::MassAndConcentration {
                    flatten = spec.effect_size;
                }
            }
            let jitter: Vec<f64> = shape.iter().map(|&p| p * (0.25 * normal(&mut rng)).exp()).collect();
            let total: f64 = jitter.iter().sum();
            values.extend(jitter.iter().map(|&p| (mass * ((1.0 - flatten) * p / total + flatten * uniform)) as f32));
        }
        records.push(TokenAttentionRecord { step_index: step, values });
    }

    let hidden_layers = vec![layers - 1];
    let header = TraceHeader {
        model_name: spec.model_name.clone(),
        num_layers: layers,
        num_heads: heads,
        passage_len: c,
        num_generated: n,
        input_len_at_step: (0..n).map(|t| prompt + t).collect(),
        token_labels: Some(labels.clone()),
        has_hidden: spec.hidden_dim.is_some(),
        hidden_dim: spec.hidden_dim,
        hidden_layers: spec.hidden_dim.map(|_| hidden_layers),
    };
    let hidden = match spec.hidden_dim {
        None => None,
        Some(dim) => {
            let records = (0..n)
                .map(|t| {
                    let shift = if labels[t] == 1 { -2.0 * spec.effect_size } else { 0.0 };
                    let values = (0..dim)
                        .map(|d| (normal(&mut rng) + if d < HIDDEN_SIGNAL_DIMS { shift } else { 0.0 }) as f32)
                        .collect();
                    HiddenRecord { step_index: t, values }
                })
                .collect();
            Some(HiddenTrace::new(header.clone(), records)?)
        }
    };
    let attention = AttentionTrace::new(header, records)?;
    Ok(SyntheticTrace { id: format!("trace_{index:05}"), attention, hidden })
}

/// Generates `spec.num_traces` traces; bit-identical for a fixed spec.
pub fn generate(spec: &SynthSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = crate::rng::substream(spec.seed, 0);
    let layers = uniform_usize(&mut rng, spec.layers);
    let heads = uniform_usize(&mut rng, spec.heads);
    let total = layers * heads;
    let num_signal = (spec.signal_heads * total as f64).round() as usize;
    let mut signal = vec![false; total];
    for i in sample(&mut rng, total, num_signal) {
        signal[i] = true;
    }
    let profiles: Vec<HeadProfile> = signal
        .iter()
        .map(|&signal| HeadProfile {
            mass: rng.random_range(spec.base_mass[0]..=spec.base_mass[1]),
            concentration: rng.random_range(0.3..3.0),
            signal,
        })
        .collect();
    let traces = (0..spec.num_traces)
        .into_par_iter()
        .map(|i| generate_trace(spec, i, layers, heads, &profiles))
        .collect::<Result<Vec<_>>>()?;
    let signal_heads = (0..total).filter(|&i| signal[i]).map(|i| HeadId { layer: i / heads, head: i % heads }).collect();
    Ok(SyntheticCorpus { spec: spec.clone(), num_layers: layers, num_heads: heads, signal_heads, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub attention_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_file: Option<String>,
    pub num_generated: usize,
    pub passage_len: usize,
    pub hallucinated_tokens: usize,
}

/// `manifest.json` written next to the trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub num_layers: usize,
    pub num_heads: usize,
    pub signal_heads: Vec<String>,
    pub traces: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `<id>.atrc` (and `<id>.ahst`) per trace plus `manifest.json` into `dir`.
pub fn write_corpus(corpus: &SyntheticCorpus, dir: &Path) -> Result<SynthManifest> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.to_path_buf(), source })?;
    let traces = corpus
        .traces
        .par_iter()
        .map(|t| {
            let attention_file = format!("{}.atrc", t.id);
            write_trace(dir.join(&attention_file), &t.attention)?;
            let hidden_file = match &t.hidden {
                Some(h) => {
                    let name = format!("{}.ahst", t.id);
                    write_hidden(dir.join(&name), h)?;
                    Some(name)
                }
                None => None,
            };
            let header = &t.attention.header;
            let hallucinated_tokens =
                header.token_labels.as_ref().map_or(0, |l| l.iter().map(|&v| usize::from(v)).sum());
            Ok(ManifestEntry {
                id: t.id.clone(),
                attention_file,
                hidden_file,
                num_generated: header.num_generated,
                passage_len: header.passage_len,
                hallucinated_tokens,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = SynthManifest {
        spec: corpus.spec.clone(),
        num_layers: corpus.num_layers,
        num_heads: corpus.num_heads,
        signal_heads: corpus.signal_heads.iter().map(ToString::to_string).collect(),
        traces,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").map_err(|source| SynthError::Io { path, source })?;
    Ok(manifest)
}
