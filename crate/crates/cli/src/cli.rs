use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aggtruth::AggregationKind;

pub const FORMATS: &str = "\
File formats:
  ATRC    attention trace. bytes 0-3 \"ATRC\", 4-7 u32 LE version 1, 8-11 u32 LE
          header length, UTF-8 JSON header, then N records of L*H*C f32 LE laid
          out layer, head, passage index.
  AHST    hidden-state trace. Same preamble with \"AHST\"; N records of
          |hidden_layers|*D f32 LE. The header needs has_hidden, hidden_dim and
          hidden_layers.
  AGDS    windowed dataset. \"AGDS\", u32 LE version 1, u32 LE rows, u32 LE cols,
          rows*cols f32 LE row-major, then one label byte per row. A JSON sidecar
          <file>.json holds feature_names, source_ids and an optional scaler.
  *.feat.json   per-trace token features written by `aggregate`.
  labels.jsonl  one {\"response_id\": \"...\", \"token_labels\": [0, 1, ...]} per line;
          response_id matches the trace file stem.

Header JSON fields: model_name, num_layers, num_heads, passage_len,
num_generated, input_len_at_step[N], token_labels[N]?, has_hidden,
hidden_dim?, hidden_layers?.

Selector short forms: all, center:R, random:N:K, random_pos:N:K, lasso:S,
spearman:R, spearman:auto, spearman:auto:signed.

--config FILE takes a JSON object whose keys are the flags of the chosen
subcommand (kebab or snake case) plus seed and threads. Flags given on the
command line win. Unknown keys are a usage error.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 internal error.";

#[derive(Debug, Parser)]
#[command(name = "aggtruth", version, about = "Passage-attention hallucination detection pipeline", after_long_help = FORMATS)]
pub struct Cli {
    /// Seed for splits, folds, random selectors and synthetic data [default: 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file of flag values; explicit flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic ATRC traces with a planted signal plus manifest.json
    #[command(after_long_help = FORMATS)]
    Synth(SynthArgs),
    /// Reduce each trace to per-token head features (<id>.feat.json)
    #[command(after_long_help = FORMATS)]
    Aggregate(AggregateArgs),
    /// Window traces or feature files into an AGDS dataset
    #[command(after_long_help = FORMATS)]
    Dataset(DatasetArgs),
    /// Run a head selector on a training set and write the SelectorResult JSON
    #[command(after_long_help = FORMATS)]
    Select(SelectArgs),
    /// Fit selector, scaler and classifier; write the fitted pipeline JSON
    #[command(after_long_help = FORMATS)]
    Train(TrainArgs),
    /// Produce an EvaluationReport, or a Gap table over saved reports
    #[command(after_long_help = FORMATS)]
    Eval(EvalArgs),
    /// Evaluate a grid of selectors on shared splits
    #[command(after_long_help = FORMATS)]
    Sweep(SweepArgs),
    /// Per-head Welch t-test: clean windows above hallucinated ones
    #[command(after_long_help = FORMATS)]
    Ttest(TtestArgs),
    /// Print header, size and validation status of a trace, dataset or feature file
    #[command(after_long_help = FORMATS)]
    Inspect(InspectArgs),
}

/// How traces become windows.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Aggregation applied to attention traces
    #[arg(long, default_value = "sum", value_parser = parse_kind)]
    pub kind: AggregationKind,
    #[arg(long, default_value_t = 8)]
    pub window_size: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Read AHST hidden-state traces instead of attention
    #[arg(long)]
    pub hidden: bool,
}

fn parse_kind(s: &str) -> Result<AggregationKind, String> {
    s.parse()
        .map_err(|e: aggtruth::aggregate::AggregateError| e.to_string())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator spec JSON; omitted fields take their defaults
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub num_traces: Option<usize>,
    /// Planted mass reduction on signal heads, in [0, 1)
    #[arg(long)]
    pub effect_size: Option<f64>,
    /// Also write AHST traces with this hidden size
    #[arg(long)]
    pub hidden_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long, default_value = "sum", value_parser = parse_kind)]
    pub kind: AggregationKind,
    /// ATRC file or directory of .atrc files
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for <id>.feat.json
    #[arg(long)]
    pub out: PathBuf,
    /// JSONL token labels that replace the labels stored in the traces
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Directory of traces or .feat.json files, or a single file
    #[arg(long = "in")]
    pub input: PathBuf,
    /// AGDS output; the sidecar goes next to it
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub load: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Selector in short form, e.g. spearman:0.5
    #[arg(long, conflicts_with = "selector_file")]
    pub selector: Option<String>,
    /// Selector as JSON, e.g. {"kind": "center", "r": 0.5}
    #[arg(long)]
    pub selector_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Training data: AGDS file, trace or feature directory
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[command(flatten)]
    pub load: InputArgs,
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Regularization strength of the detection classifier
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = Penalty::L2)]
    pub penalty: Penalty,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Source-train data: AGDS file, trace or feature directory
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[command(flatten)]
    pub load: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fitted pipeline JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Protocol config JSON: fit on source_train and score every test set
    #[arg(long, conflicts_with_all = ["model", "gap_methods"])]
    pub protocol: Option<PathBuf>,
    /// Fitted pipeline from `train`; needs the four data flags below
    #[arg(long, requires_all = ["source_train", "source_test", "target_1", "target_2"], conflicts_with = "gap_methods")]
    pub model: Option<PathBuf>,
    /// Data the model was trained on; used for the cross-validated val column
    #[arg(long)]
    pub source_train: Option<PathBuf>,
    #[arg(long)]
    pub source_test: Option<PathBuf>,
    #[arg(long = "target-1")]
    pub target_1: Option<PathBuf>,
    #[arg(long = "target-2")]
    pub target_2: Option<PathBuf>,
    /// EvaluationReport JSON files; prints the Gap table over these methods
    #[arg(long, num_args = 1..)]
    pub gap_methods: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[command(flatten)]
    pub load: InputArgs,
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Protocol config JSON; its selector field is ignored
    #[arg(long)]
    pub protocol: PathBuf,
    /// Grid cells in short form; `all` keeps every head
    #[arg(long, num_args = 1.., required_unless_present = "grid_file")]
    pub grid: Vec<String>,
    /// JSON array of selector objects, null for all heads
    #[arg(long, conflicts_with = "grid")]
    pub grid_file: Option<PathBuf>,
    /// SweepReport JSON; the table then goes to standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    /// One or more datasets; one report each
    #[arg(long = "in", num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[command(flatten)]
    pub load: InputArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// ATRC, AHST, AGDS or .feat.json file
    pub path: PathBuf,
}
