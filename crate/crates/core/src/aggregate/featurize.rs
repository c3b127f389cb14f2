use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::kernels::{agg_cossim, agg_entropy, agg_jsdiv, agg_sum, extend_residual, passage_pct};
use super::{AggregateError, AggregationKind, Result};
use crate::matrix::Matrix;
use crate::trace_io::{AttentionTrace, Shape, TokenAttentionRecord, TraceHeader, TraceReader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}h{}", self.layer, self.head)
    }
}

/// One generated token paired with the attention record that describes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedStep {
    pub token: usize,
    /// Record produced while generating the following token.
    pub record: usize,
    pub label: Option<u8>,
    pub input_len: usize,
}

/// Token `t` is described by record `t + 1`. The last token has no successor
/// record and is dropped together with its label.
pub fn align_shift(header: &TraceHeader) -> Vec<AlignedStep> {
    let n = header.num_generated;
    (0..n.saturating_sub(1))
        .map(|t| AlignedStep {
            token: t,
            record: t + 1,
            label: header.token_labels.as_ref().map(|l| l[t]),
            input_len: header.input_len_at_step[t],
        })
        .collect()
}

/// Per-token, per-head features of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenFeatureSequence {
    pub kind: AggregationKind,
    pub num_tokens: usize,
    pub head_ids: Vec<HeadId>,
    /// `[token][layer * H + head]`.
    pub features: Matrix,
    pub passage_pct: Vec<f64>,
    pub labels: Option<Vec<u8>>,
    /// Count of (token, layer, head) rows with zero norm seen by `CosSim`.
    #[serde(default)]
    pub zero_norm_rows: usize,
}

impl TokenFeatureSequence {
    pub fn num_features(&self) -> usize {
        self.head_ids.len()
    }
}

/// Incremental featurizer: feed records in step order, one at a time.
pub struct Featurizer {
    header: TraceHeader,
    shape: Shape,
    kind: AggregationKind,
    aligned: Vec<AlignedStep>,
    next_record: usize,
    data: Vec<f64>,
    zero_norm_rows: usize,
    row_buf: Vec<f64>,
    out_buf: Vec<f64>,
}

impl Featurizer {
    pub fn new(header: &TraceHeader, kind: AggregationKind) -> Result<Self> {
        let shape = header.shape();
        if kind == AggregationKind::CosSim && shape.heads < 2 {
            return Err(AggregateError::TooFewHeads(shape.heads));
        }
        let aligned = align_shift(header);
        Ok(Self {
            header: header.clone(),
            shape,
            kind,
            data: Vec::with_capacity(aligned.len() * shape.layers * shape.heads),
            aligned,
            next_record: 0,
            zero_norm_rows: 0,
            row_buf: Vec::with_capacity(shape.heads * shape.passage),
            out_buf: Vec::with_capacity(shape.heads),
        })
    }

    pub fn push(&mut self, record: &TokenAttentionRecord) -> Result<()> {
        if record.step_index != self.next_record {
            return Err(AggregateError::OutOfOrder { expected: self.next_record, found: record.step_index });
        }
        self.next_record += 1;
        // record 0 describes no token after the alignment shift
        if record.step_index == 0 {
            return Ok(());
        }
        for layer in 0..self.shape.layers {
            self.row_buf.clear();
            self.row_buf.extend(record.layer(self.shape, layer).iter().map(|&v| f64::from(v)));
            self.reduce_layer()?;
            self.data.extend_from_slice(&self.out_buf);
        }
        Ok(())
    }

    fn reduce_layer(&mut self) -> Result<()> {
        let c = self.shape.passage;
        self.out_buf.clear();
        match self.kind {
            AggregationKind::Sum => self.out_buf.extend(self.row_buf.chunks_exact(c).map(agg_sum)),
            AggregationKind::CosSim => {
                let out = agg_cossim(&self.row_buf, c)?;
                self.zero_norm_rows += out.zero_norm.len();
                self.out_buf.extend(out.values);
            }
            AggregationKind::Entropy => {
                for row in self.row_buf.chunks_exact(c) {
                    self.out_buf.push(agg_entropy(&extend_residual(row)?));
                }
            }
            AggregationKind::JsDiv => {
                let dists = self.row_buf.chunks_exact(c).map(extend_residual).collect::<Result<Vec<_>>>()?;
                self.out_buf.extend(agg_jsdiv(&dists));
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<TokenFeatureSequence> {
        if self.next_record != self.header.num_generated {
            return Err(crate::trace_io::TraceError::RecordCount {
                expected: self.header.num_generated,
                found: self.next_record,
            }
            .into());
        }
        let n = self.aligned.len();
        let f = self.shape.layers * self.shape.heads;
        let head_ids = (0..self.shape.layers)
            .flat_map(|layer| (0..self.shape.heads).map(move |head| HeadId { layer, head }))
            .collect();
        let labels = self
            .header
            .token_labels
            .as_ref()
            .map(|_| self.aligned.iter().map(|a| a.label.unwrap_or(0)).collect());
        let passage_pct = self.aligned.iter().map(|a| passage_pct(&self.header, a.token)).collect();
        Ok(TokenFeatureSequence {
            kind: self.kind,
            num_tokens: n,
            head_ids,
            features: Matrix::from_vec(n, f, self.data),
            passage_pct,
            labels,
            zero_norm_rows: self.zero_norm_rows,
        })
    }
}

pub fn featurize(trace: &AttentionTrace, kind: AggregationKind) -> Result<TokenFeatureSequence> {
    let mut f = Featurizer::new(&trace.header, kind)?;
    for rec in &trace.records {
        f.push(rec)?;
    }
    f.finish()
}

/// Featurizes straight from a reader, keeping one record resident.
pub fn featurize_reader<R: Read>(reader: TraceReader<R>, kind: AggregationKind) -> Result<TokenFeatureSequence> {
    let mut f = Featurizer::new(reader.header(), kind)?;
    for rec in reader {
        f.push(&rec?)?;
    }
    f.finish()
}
