use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::open_buffered;
use super::{Result, TraceError, TraceHeader};

/// One line of a JSONL label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub response_id: String,
    pub token_labels: Vec<u8>,
}

/// Token labels keyed by response id. Blank lines are skipped; ids must be unique.
pub fn parse_labels<R: BufRead>(reader: R) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| TraceError::Labels { line: i + 1, message };
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        if let Some(t) = rec.token_labels.iter().position(|&l| l > 1) {
            return Err(fail(format!("token_labels[{t}] = {} is not 0 or 1", rec.token_labels[t])));
        }
        if out.contains_key(&rec.response_id) {
            return Err(fail(format!("duplicate response_id {:?}", rec.response_id)));
        }
        out.insert(rec.response_id, rec.token_labels);
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<u8>>> {
    parse_labels(open_buffered(path)?)
}

/// Replaces the header's token labels, keeping every header invariant.
pub fn attach_labels(header: &mut TraceHeader, labels: &[u8]) -> Result<()> {
    if labels.len() != header.num_generated {
        return Err(TraceError::Header(format!(
            "label file has {} token labels, num_generated is {}",
            labels.len(),
            header.num_generated
        )));
    }
    header.token_labels = Some(labels.to_vec());
    header.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let text = "{\"response_id\":\"a\",\"token_labels\":[0,1,1]}\n\n{\"response_id\":\"b\",\"token_labels\":[]}\n";
        let map = parse_labels(text.as_bytes()).unwrap();
        assert_eq!(map["a"], vec![0, 1, 1]);
        assert!(map["b"].is_empty());

        let dup = "{\"response_id\":\"a\",\"token_labels\":[0]}\n{\"response_id\":\"a\",\"token_labels\":[1]}";
        assert!(matches!(parse_labels(dup.as_bytes()), Err(TraceError::Labels { line: 2, .. })));
        let bad = "{\"response_id\":\"a\",\"token_labels\":[2]}";
        assert!(matches!(parse_labels(bad.as_bytes()), Err(TraceError::Labels { line: 1, .. })));
        assert!(parse_labels("{\"id\":1}".as_bytes()).is_err());
    }

    #[test]
    fn attach_checks_length() {
        let mut header = TraceHeader {
            model_name: "m".into(),
            num_layers: 1,
            num_heads: 1,
            passage_len: 2,
            num_generated: 2,
            input_len_at_step: vec![3, 4],
            token_labels: None,
            has_hidden: false,
            hidden_dim: None,
            hidden_layers: None,
        };
        assert!(attach_labels(&mut header, &[1]).is_err());
        attach_labels(&mut header, &[0, 1]).unwrap();
        assert_eq!(header.token_labels, Some(vec![0, 1]));
    }
}
