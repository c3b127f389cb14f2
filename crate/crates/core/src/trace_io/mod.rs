//! Portable trace files that carry per-token attention over the passage
//! (`ATRC`) and optional hidden states (`AHST`).
//!
//! Both formats share a preamble:
//!
//! ```text
//! bytes 0..4    magic ("ATRC" or "AHST")
//! bytes 4..8    u32 LE format version (1)
//! bytes 8..12   u32 LE header length in bytes
//! header        UTF-8 JSON (`TraceHeader`)
//! body          N records of f32 LE
//! ```
//!
//! An `ATRC` record holds `L·H·C` values laid out layer-major, then head, then
//! passage index. An `AHST` record holds `|hidden_layers|·D` values.
//!
//! Readers stream one record at a time and validate each record as it is
//! decoded; [`read_trace`] and [`read_hidden`] materialise the whole file and
//! never return a partially read trace.
//!
//! Token labels may also arrive separately as JSONL lines of
//! `{"response_id": ..., "token_labels": [0, 1, ...]}`.

mod attention;
mod format;
mod header;
mod hidden;
mod labels;

pub use attention::{
    read_trace, validate_record, write_trace, AttentionTrace, TokenAttentionRecord, TraceReader,
    TraceWriter,
};
pub use format::{sniff_magic, FileKind, FORMAT_VERSION};
pub use header::{Shape, TraceHeader};
pub use hidden::{read_hidden, write_hidden, HiddenReader, HiddenRecord, HiddenTrace, HiddenWriter};
pub use labels::{attach_labels, parse_labels, read_labels, LabelRecord};

/// Slack allowed on the passage-restricted attention sum of one row.
pub const PASSAGE_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("malformed header json: {0}")]
    HeaderJson(#[from] serde_json::Error),
    #[error("header invariant violated: {0}")]
    Header(String),
    #[error("truncated body: record {record} has {got} of {expected} bytes")]
    Truncated { record: usize, expected: usize, got: usize },
    #[error("trailing bytes after the {records} records declared in the header")]
    TrailingBytes { records: usize },
    #[error("record count mismatch: header declares {expected}, got {found}")]
    RecordCount { expected: usize, found: usize },
    #[error("record {step} has {found} values, expected {expected}")]
    RecordLength { step: usize, expected: usize, found: usize },
    #[error("negative attention {value} at layer {layer}, head {head}, step {step}, passage index {index}")]
    NegativeAttention { layer: usize, head: usize, step: usize, index: usize, value: f32 },
    #[error("non-finite value at step {step}, flat index {index}")]
    NonFinite { step: usize, index: usize },
    #[error("label file line {line}: {message}")]
    Labels { line: usize, message: String },
    #[error("passage attention sum {sum} exceeds 1 + {PASSAGE_SUM_TOLERANCE} at layer {layer}, head {head}, step {step}")]
    PassageSumExceeded { layer: usize, head: usize, step: usize, sum: f64 },
}

pub type Result<T> = std::result::Result<T, TraceError>;
