use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use aggtruth::aggregate::Featurizer;
use aggtruth::dataset::{read_dataset, write_dataset, WindowConfig, WindowedDataset};
use aggtruth::eval::{
    evaluate_fitted, fit_pipeline, format_table, load_dataset, run_protocol, sweep_selectors,
    EvaluationReport, FittedPipeline, LoadOptions, ProtocolConfig, ProtocolData, ProtocolSettings,
    TableRow, FEATURE_EXT,
};
use aggtruth::model::{gap_all, head_ttest_analysis, GapInput};
use aggtruth::synth::{generate, write_corpus, SynthSpec};
use aggtruth::trace_io::{
    attach_labels, read_labels, sniff_magic, FileKind, HiddenReader, TraceReader,
};
use aggtruth::{LogRegConfig, Regularization, SelectorConfig, TokenFeatureSequence};

use crate::cli::*;
use crate::error::{CliError, Result};

/// Global settings shared by every subcommand.
pub struct Globals {
    /// Set only when given explicitly; each command falls back to its own default.
    pub seed: Option<u64>,
}

const DEFAULT_SEED: u64 = 42;

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn print(text: &str) -> Result<()> {
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(format!("stdout: {e}")))
}

/// JSON to `out`, or to standard output.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = to_json(value)?;
    match out {
        Some(p) => write_file(p, &text),
        None => print(&text),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

/// Like [`read_json`] for files that configure a run, where a bad file is a usage error.
fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path).map_err(|e| match e {
        CliError::Data(m) => CliError::Usage(m),
        other => other,
    })
}

/// Protocol config whose relative dataset paths are taken from the config file's directory.
fn read_protocol(path: &Path, globals: &Globals) -> Result<ProtocolConfig> {
    let mut cfg: ProtocolConfig = read_config(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut cfg.source_train,
        &mut cfg.target_test_1,
        &mut cfg.target_test_2,
    ]
    .into_iter()
    .chain(cfg.source_test.as_mut())
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(seed) = globals.seed {
        cfg.settings.seed = seed;
    }
    Ok(cfg)
}

fn load_options(args: &InputArgs) -> LoadOptions {
    LoadOptions {
        aggregation: args.kind,
        window: WindowConfig {
            window_size: args.window_size,
            stride: args.stride,
        },
        hidden: args.hidden,
    }
}

fn load(path: &Path, args: &InputArgs) -> Result<WindowedDataset> {
    Ok(load_dataset(path, &load_options(args))?)
}

fn resolve_selector(args: &SelectorArgs, globals: &Globals) -> Result<Option<SelectorConfig>> {
    let cfg = match (&args.selector, &args.selector_file) {
        (Some(s), _) if matches!(s.as_str(), "all" | "none") => None,
        (Some(s), _) => Some(s.parse::<SelectorConfig>()?),
        (None, Some(path)) => read_config::<Option<SelectorConfig>>(path)?,
        (None, None) => None,
    };
    if let Some(c) = &cfg {
        c.validate()?;
    }
    Ok(match (cfg, globals.seed) {
        (Some(c), Some(seed)) => Some(c.with_seed(seed)),
        (c, _) => c,
    })
}

fn logreg(args: &ModelArgs) -> Result<LogRegConfig> {
    if !(args.lambda.is_finite() && args.lambda > 0.0) {
        return Err(CliError::Usage(format!(
            "--lambda must be positive, got {}",
            args.lambda
        )));
    }
    let reg = match args.penalty {
        Penalty::L1 => Regularization::L1(args.lambda),
        Penalty::L2 => Regularization::L2(args.lambda),
    };
    Ok(LogRegConfig {
        reg,
        max_iter: args.max_iter,
        tol: args.tol,
        ..LogRegConfig::default()
    })
}

fn file_id(path: &Path, ext: &str) -> String {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    name.strip_suffix(ext).unwrap_or(name).to_string()
}

fn files_with(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.to_str().is_some_and(|s| s.ends_with(ext)) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn synth(args: &SynthArgs, globals: &Globals) -> Result<()> {
    let mut spec: SynthSpec = match &args.spec {
        Some(p) => read_config(p)?,
        None => SynthSpec::default(),
    };
    if let Some(n) = args.num_traces {
        spec.num_traces = n;
    }
    if let Some(d) = args.effect_size {
        spec.effect_size = d;
    }
    if args.hidden_dim.is_some() {
        spec.hidden_dim = args.hidden_dim;
    }
    if let Some(seed) = globals.seed {
        spec.seed = seed;
    }
    let corpus = generate(&spec)?;
    let manifest = write_corpus(&corpus, &args.out)?;
    let tokens: usize = manifest.traces.iter().map(|t| t.num_generated).sum();
    let hallucinated: usize = manifest.traces.iter().map(|t| t.hallucinated_tokens).sum();
    emit(
        &json!({
            "traces": manifest.traces.len(),
            "num_layers": manifest.num_layers,
            "num_heads": manifest.num_heads,
            "signal_heads": manifest.signal_heads,
            "tokens": tokens,
            "hallucinated_tokens": hallucinated,
        }),
        None,
    )
}

pub fn aggregate(args: &AggregateArgs) -> Result<()> {
    let inputs = if args.input.is_dir() {
        files_with(&args.input, ".atrc")?
    } else {
        vec![args.input.clone()]
    };
    if inputs.is_empty() {
        return Err(CliError::Data(format!(
            "{} holds no .atrc files",
            args.input.display()
        )));
    }
    let labels = args.labels.as_ref().map(read_labels).transpose()?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let results = inputs
        .par_iter()
        .map(|path| -> Result<TokenFeatureSequence> {
            let id = file_id(path, ".atrc");
            let with_path = |e: CliError| match e {
                CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
                other => other,
            };
            let reader = TraceReader::open(path).map_err(|e| with_path(e.into()))?;
            let mut header = reader.header().clone();
            if let Some(map) = &labels {
                let token_labels = map.get(&id).ok_or_else(|| {
                    CliError::Data(format!("label file has no response_id {id:?}"))
                })?;
                attach_labels(&mut header, token_labels).map_err(|e| with_path(e.into()))?;
            }
            let mut featurizer =
                Featurizer::new(&header, args.kind).map_err(|e| with_path(e.into()))?;
            for record in reader {
                featurizer
                    .push(&record.map_err(|e| with_path(e.into()))?)
                    .map_err(|e| with_path(e.into()))?;
            }
            let seq = featurizer.finish().map_err(|e| with_path(e.into()))?;
            let text =
                serde_json::to_string(&seq).map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&args.out.join(format!("{id}.{FEATURE_EXT}")), &text)?;
            Ok(seq)
        })
        .collect::<Result<Vec<_>>>()?;
    emit(
        &json!({
            "kind": args.kind,
            "traces": results.len(),
            "tokens": results.iter().map(|s| s.num_tokens).sum::<usize>(),
            "zero_norm_rows": results.iter().map(|s| s.zero_norm_rows).sum::<usize>(),
        }),
        None,
    )
}

fn dataset_summary(ds: &WindowedDataset) -> serde_json::Value {
    let (neg, pos) = ds.class_counts();
    let traces: std::collections::BTreeSet<String> = ds.trace_ids().into_iter().collect();
    json!({
        "rows": ds.num_rows(),
        "features": ds.num_features(),
        "positives": pos,
        "negatives": neg,
        "traces": traces.len(),
    })
}

pub fn dataset(args: &DatasetArgs) -> Result<()> {
    let ds = load(&args.input, &args.load)?;
    write_dataset(&args.out, &ds, None)?;
    emit(&dataset_summary(&ds), None)
}

pub fn select(args: &SelectArgs, globals: &Globals) -> Result<()> {
    let cfg = resolve_selector(&args.selector, globals)?.ok_or_else(|| {
        CliError::Usage("select needs --selector or --selector-file naming a selector".into())
    })?;
    let ds = load(&args.input, &args.load)?;
    let result = aggtruth::select::run_selector(&ds, &cfg)?;
    emit(&result, args.out.as_deref())
}

pub fn train(args: &TrainArgs, globals: &Globals) -> Result<()> {
    let selector = resolve_selector(&args.selector, globals)?;
    let cfg = logreg(&args.model)?;
    let ds = load(&args.input, &args.load)?;
    let pipeline = fit_pipeline(&ds, selector.as_ref(), &cfg)?;
    write_file(&args.out, &to_json(&pipeline)?)?;
    emit(
        &json!({
            "method": selector.map_or_else(|| "all".to_string(), |s| s.to_string()),
            "heads_pct": pipeline.heads_pct,
            "kept_features": pipeline.kept_names.len(),
            "converged": pipeline.model.converged,
            "iterations": pipeline.model.iterations,
            "checksum": pipeline.checksum(),
        }),
        None,
    )
}

fn gap_table(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut reports: Vec<EvaluationReport> = Vec::new();
    let mut input = GapInput::default();
    for p in paths {
        let r: EvaluationReport = read_json(p)?;
        if input.aucs.contains_key(&r.method) {
            return Err(CliError::Usage(format!(
                "method {:?} appears in more than one report",
                r.method
            )));
        }
        input.insert(r.method.clone(), r.test_triple());
        reports.push(r);
    }
    let gaps = gap_all(&input)?;
    let rows: Vec<TableRow> = reports
        .iter()
        .map(|r| TableRow {
            gap: gaps.get(&r.method).copied(),
            ..TableRow::from_report(r)
        })
        .collect();
    if let Some(out) = out {
        write_file(out, &to_json(&gaps)?)?;
    }
    print(&format_table(&rows))
}

pub fn eval(args: &EvalArgs, globals: &Globals) -> Result<()> {
    if !args.gap_methods.is_empty() {
        return gap_table(&args.gap_methods, args.out.as_deref());
    }
    if let Some(path) = &args.protocol {
        let cfg = read_protocol(path, globals)?;
        let (_, report) = run_protocol(&cfg)?;
        return emit(&report, args.out.as_deref());
    }
    let Some(model) = &args.model else {
        return Err(CliError::Usage(
            "eval needs --protocol, --model or --gap-methods".into(),
        ));
    };
    let pipeline: FittedPipeline = read_json(model)?;
    let path = |p: &Option<PathBuf>| {
        p.clone()
            .expect("clap enforces the data flags with --model")
    };
    let data = ProtocolData {
        source_train: load(&path(&args.source_train), &args.load)?,
        source_test: Some(load(&path(&args.source_test), &args.load)?),
        target_1: load(&path(&args.target_1), &args.load)?,
        target_2: load(&path(&args.target_2), &args.load)?,
    };
    let settings = ProtocolSettings {
        aggregation: args.load.kind,
        hidden: args.load.hidden,
        selector: pipeline.selection.as_ref().map(|s| s.config),
        window: WindowConfig {
            window_size: args.load.window_size,
            stride: args.load.stride,
        },
        seed: globals.seed.unwrap_or(DEFAULT_SEED),
        cv_folds: args.cv_folds,
        logreg: LogRegConfig {
            reg: pipeline.model.reg,
            ..LogRegConfig::default()
        },
        ..ProtocolSettings::default()
    };
    settings.validate()?;
    let report = evaluate_fitted(&pipeline, &data, &settings)?;
    emit(&report, args.out.as_deref())
}

pub fn sweep(args: &SweepArgs, globals: &Globals) -> Result<()> {
    let cfg = read_protocol(&args.protocol, globals)?;
    let grid: Vec<Option<SelectorConfig>> = match &args.grid_file {
        Some(p) => read_config(p)?,
        None => args
            .grid
            .iter()
            .map(|s| match s.as_str() {
                "all" | "none" => Ok(None),
                other => other.parse().map(Some).map_err(CliError::from),
            })
            .collect::<Result<_>>()?,
    };
    let grid: Vec<Option<SelectorConfig>> = match globals.seed {
        Some(seed) => grid
            .into_iter()
            .map(|c| c.map(|c| c.with_seed(seed)))
            .collect(),
        None => grid,
    };
    let data = cfg.load()?;
    let report = sweep_selectors(&data, &cfg.settings, &grid)?;
    match &args.out {
        Some(out) => {
            write_file(out, &to_json(&report)?)?;
            print(&report.table())
        }
        None => emit(&report, None),
    }
}

pub fn ttest(args: &TtestArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let datasets = args
        .inputs
        .iter()
        .map(|p| load(p, &args.load))
        .collect::<Result<Vec<_>>>()?;
    let reports = head_ttest_analysis(&datasets, args.alpha)?;
    let named: BTreeMap<String, _> = args
        .inputs
        .iter()
        .map(|p| p.display().to_string())
        .zip(reports)
        .collect();
    emit(&named, args.out.as_deref())
}

fn inspect_attention(path: &Path) -> Result<serde_json::Value> {
    let reader = match TraceReader::open(path) {
        Ok(r) => r,
        Err(e) => {
            return Ok(
                json!({ "format": "ATRC", "header": null, "valid_records": 0, "error": e.to_string() }),
            )
        }
    };
    let header = reader.header().clone();
    let mut records = 0usize;
    let mut error = None;
    for rec in reader {
        match rec {
            Ok(_) => records += 1,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    Ok(json!({ "format": "ATRC", "header": header, "valid_records": records, "error": error }))
}

fn inspect_hidden(path: &Path) -> Result<serde_json::Value> {
    let reader = match HiddenReader::open(path) {
        Ok(r) => r,
        Err(e) => {
            return Ok(
                json!({ "format": "AHST", "header": null, "valid_records": 0, "error": e.to_string() }),
            )
        }
    };
    let header = reader.header().clone();
    let (records, error) = match reader.into_trace() {
        Ok(t) => (t.records.len(), None),
        Err(e) => (0, Some(e.to_string())),
    };
    Ok(json!({ "format": "AHST", "header": header, "valid_records": records, "error": error }))
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let path = &args.path;
    let bytes = fs::metadata(path).map_err(|e| CliError::io(path, e))?.len();
    let mut info = if path.to_str().is_some_and(|s| s.ends_with(FEATURE_EXT)) {
        let seq: TokenFeatureSequence = read_json(path)?;
        json!({
            "format": "features",
            "kind": seq.kind,
            "num_tokens": seq.num_tokens,
            "num_features": seq.num_features(),
            "labeled": seq.labels.is_some(),
            "hallucinated_tokens": seq.labels.as_ref().map(|l| l.iter().filter(|&&v| v == 1).count()),
            "zero_norm_rows": seq.zero_norm_rows,
            "error": null,
        })
    } else {
        match sniff_magic(path)? {
            FileKind::Attention => inspect_attention(path)?,
            FileKind::Hidden => inspect_hidden(path)?,
            FileKind::Dataset => {
                let (ds, scaler) = read_dataset(path)?;
                let mut v = dataset_summary(&ds);
                v["format"] = json!("AGDS");
                v["has_scaler"] = json!(scaler.is_some());
                v["feature_names"] = json!(ds.feature_names);
                v["error"] = json!(null);
                v
            }
        }
    };
    info["file_bytes"] = json!(bytes);
    emit(&info, None)?;
    match info["error"].as_str() {
        Some(e) => Err(CliError::Data(format!("{}: {e}", path.display()))),
        None => Ok(()),
    }
}
