use serde::{Deserialize, Serialize};

use super::{Result, TraceError};

/// JSON header shared by `ATRC` and `AHST` files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub model_name: String,
    pub num_layers: usize,
    pub num_heads: usize,
    pub passage_len: usize,
    pub num_generated: usize,
    /// Total input tokens visible when generating token `t` (passage, prompt and
    /// previously generated tokens).
    pub input_len_at_step: Vec<usize>,
    /// 1 marks a hallucinated token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_labels: Option<Vec<u8>>,
    #[serde(default)]
    pub has_hidden: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<Vec<usize>>,
}

/// Attention record geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub layers: usize,
    pub heads: usize,
    pub passage: usize,
}

impl Shape {
    pub fn record_len(&self) -> usize {
        self.layers * self.heads * self.passage
    }

    /// Flat offset of the first passage value of `(layer, head)`.
    pub fn row_offset(&self, layer: usize, head: usize) -> usize {
        (layer * self.heads + head) * self.passage
    }
}

impl TraceHeader {
    pub fn shape(&self) -> Shape {
        Shape { layers: self.num_layers, heads: self.num_heads, passage: self.passage_len }
    }

    /// Checks every header-level invariant.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(TraceError::Header(msg));
        if self.num_layers == 0 || self.num_heads == 0 || self.passage_len == 0 {
            return fail(format!(
                "num_layers, num_heads and passage_len must be >= 1 (got {}, {}, {})",
                self.num_layers, self.num_heads, self.passage_len
            ));
        }
        if self.input_len_at_step.len() != self.num_generated {
            return fail(format!(
                "input_len_at_step has {} entries, num_generated is {}",
                self.input_len_at_step.len(),
                self.num_generated
            ));
        }
        for (t, &len) in self.input_len_at_step.iter().enumerate() {
            if len < self.passage_len {
                return fail(format!(
                    "input_len_at_step[{t}] = {len} is smaller than passage_len {}",
                    self.passage_len
                ));
            }
            if t > 0 && len < self.input_len_at_step[t - 1] {
                return fail(format!("input_len_at_step decreases at step {t}"));
            }
        }
        if let Some(labels) = &self.token_labels {
            if labels.len() != self.num_generated {
                return fail(format!(
                    "token_labels has {} entries, num_generated is {}",
                    labels.len(),
                    self.num_generated
                ));
            }
            if let Some(t) = labels.iter().position(|&l| l > 1) {
                return fail(format!("token_labels[{t}] = {} is not 0 or 1", labels[t]));
            }
        }
        if self.hidden_dim == Some(0) {
            return fail("hidden_dim must be >= 1".into());
        }
        Ok(())
    }

    /// Additional checks for a hidden-state file header.
    pub fn validate_hidden(&self) -> Result<()> {
        self.validate()?;
        if !self.has_hidden {
            return Err(TraceError::Header("hidden-state file requires has_hidden = true".into()));
        }
        match (&self.hidden_dim, &self.hidden_layers) {
            (Some(_), Some(layers)) if !layers.is_empty() => Ok(()),
            _ => Err(TraceError::Header(
                "hidden-state file requires hidden_dim and a non-empty hidden_layers".into(),
            )),
        }
    }

    pub fn hidden_record_len(&self) -> usize {
        self.hidden_dim.unwrap_or(0) * self.hidden_layers.as_ref().map_or(0, Vec::len)
    }
}
