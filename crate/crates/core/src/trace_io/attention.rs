use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::format::{
    expect_eof, open_buffered, read_f32_record, read_preamble, write_f32s, write_preamble,
    ATRC_MAGIC,
};
use super::{Result, Shape, TraceError, TraceHeader, PASSAGE_SUM_TOLERANCE};

/// Attention of one generation step over the passage, `[layer][head][passage]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenAttentionRecord {
    pub step_index: usize,
    pub values: Vec<f32>,
}

impl TokenAttentionRecord {
    pub fn row(&self, shape: Shape, layer: usize, head: usize) -> &[f32] {
        let start = shape.row_offset(layer, head);
        &self.values[start..start + shape.passage]
    }

    /// All head rows of one layer, `[head][passage]`.
    pub fn layer(&self, shape: Shape, layer: usize) -> &[f32] {
        let start = shape.row_offset(layer, 0);
        &self.values[start..start + shape.heads * shape.passage]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub header: TraceHeader,
    pub records: Vec<TokenAttentionRecord>,
}

impl AttentionTrace {
    /// Builds a trace after validating the header and every record.
    pub fn new(header: TraceHeader, records: Vec<TokenAttentionRecord>) -> Result<Self> {
        let trace = Self { header, records };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        self.header.validate()?;
        if self.records.len() != self.header.num_generated {
            return Err(TraceError::RecordCount {
                expected: self.header.num_generated,
                found: self.records.len(),
            });
        }
        let shape = self.header.shape();
        for (t, rec) in self.records.iter().enumerate() {
            if rec.step_index != t {
                return Err(TraceError::Header(format!(
                    "record at position {t} carries step_index {}",
                    rec.step_index
                )));
            }
            validate_record(shape, t, &rec.values)?;
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.header.shape()
    }
}

/// Checks the length, sign, finiteness and passage-sum bound of one record.
pub fn validate_record(shape: Shape, step: usize, values: &[f32]) -> Result<()> {
    if values.len() != shape.record_len() {
        return Err(TraceError::RecordLength { step, expected: shape.record_len(), found: values.len() });
    }
    for layer in 0..shape.layers {
        for head in 0..shape.heads {
            let start = shape.row_offset(layer, head);
            let row = &values[start..start + shape.passage];
            let mut sum = 0.0f64;
            for (i, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(TraceError::NonFinite { step, index: start + i });
                }
                if v < 0.0 {
                    return Err(TraceError::NegativeAttention { layer, head, step, index: i, value: v });
                }
                sum += f64::from(v);
            }
            if sum > 1.0 + PASSAGE_SUM_TOLERANCE {
                return Err(TraceError::PassageSumExceeded { layer, head, step, sum });
            }
        }
    }
    Ok(())
}

/// Streaming `ATRC` reader; holds one record in memory at a time.
pub struct TraceReader<R> {
    inner: R,
    header: TraceHeader,
    next: usize,
    bytes: Vec<u8>,
    done: bool,
}

impl TraceReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(open_buffered(path)?)
    }
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let header = read_preamble(&mut inner, ATRC_MAGIC)?;
        header.validate()?;
        Ok(Self { inner, header, next: 0, bytes: Vec::new(), done: false })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn read_next(&mut self) -> Result<Option<TokenAttentionRecord>> {
        if self.next == self.header.num_generated {
            expect_eof(&mut self.inner, self.next)?;
            return Ok(None);
        }
        let shape = self.header.shape();
        let mut values = vec![0f32; shape.record_len()];
        read_f32_record(&mut self.inner, &mut self.bytes, &mut values, self.next)?;
        validate_record(shape, self.next, &values)?;
        let rec = TokenAttentionRecord { step_index: self.next, values };
        self.next += 1;
        Ok(Some(rec))
    }

    /// Reads every remaining record; any error discards everything read so far.
    pub fn into_trace(self) -> Result<AttentionTrace> {
        let header = self.header.clone();
        let records = self.collect::<Result<Vec<_>>>()?;
        Ok(AttentionTrace { header, records })
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<TokenAttentionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_next() {
            Ok(Some(rec)) => Some(Ok(rec)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<AttentionTrace> {
    TraceReader::open(path)?.into_trace()
}

/// Incremental `ATRC` writer. [`TraceWriter::finish`] checks the record count.
pub struct TraceWriter<W: Write> {
    inner: W,
    header: TraceHeader,
    written: usize,
}

impl TraceWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: TraceHeader) -> Result<Self> {
        header.validate()?;
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut inner: W, header: TraceHeader) -> Result<Self> {
        header.validate()?;
        write_preamble(&mut inner, ATRC_MAGIC, &header)?;
        Ok(Self { inner, header, written: 0 })
    }

    pub fn write_record(&mut self, values: &[f32]) -> Result<()> {
        if self.written == self.header.num_generated {
            return Err(TraceError::RecordCount {
                expected: self.header.num_generated,
                found: self.written + 1,
            });
        }
        validate_record(self.header.shape(), self.written, values)?;
        write_f32s(&mut self.inner, values)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.num_generated {
            return Err(TraceError::RecordCount { expected: self.header.num_generated, found: self.written });
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Validates the whole trace, then writes it. Nothing is written on a validation failure.
pub fn write_trace(path: impl AsRef<Path>, trace: &AttentionTrace) -> Result<()> {
    trace.validate()?;
    let mut w = TraceWriter::create(path, trace.header.clone())?;
    for rec in &trace.records {
        w.write_record(&rec.values)?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_io::format::preamble_len;

    fn header(n: usize) -> TraceHeader {
        TraceHeader {
            model_name: "tiny".into(),
            num_layers: 2,
            num_heads: 2,
            passage_len: 3,
            num_generated: n,
            input_len_at_step: (0..n).map(|t| 10 + t).collect(),
            token_labels: Some(vec![0; n]),
            has_hidden: false,
            hidden_dim: None,
            hidden_layers: None,
        }
    }

    fn uniform_trace(n: usize, v: f32) -> AttentionTrace {
        let h = header(n);
        let len = h.shape().record_len();
        let records = (0..n).map(|t| TokenAttentionRecord { step_index: t, values: vec![v; len] }).collect();
        AttentionTrace::new(h, records).unwrap()
    }

    #[test]
    fn empty_trace_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.atrc");
        let trace = uniform_trace(0, 0.0);
        write_trace(&path, &trace).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(size, preamble_len(&trace.header).unwrap());
        assert_eq!(read_trace(&path).unwrap(), trace);
    }

    #[test]
    fn file_size_matches_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.atrc");
        let trace = uniform_trace(1, 0.1);
        write_trace(&path, &trace).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(size, preamble_len(&trace.header).unwrap() + 2 * 2 * 3 * 4);
    }

    #[test]
    fn rejects_row_over_one() {
        let mut trace = uniform_trace(2, 0.1);
        // layer 1, head 0 of step 1 sums to 1.7
        let off = trace.shape().row_offset(1, 0);
        trace.records[1].values[off..off + 3].copy_from_slice(&[0.5, 0.6, 0.6]);
        match trace.validate().unwrap_err() {
            TraceError::PassageSumExceeded { layer, head, step, sum } => {
                assert_eq!((layer, head, step), (1, 0, 1));
                assert!((sum - 1.7).abs() < 1e-6);
            }
            e => panic!("unexpected {e}"),
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.atrc");
        assert!(write_trace(&path, &trace).is_err());
        assert!(!path.exists(), "nothing may be written for an invalid trace");
    }

    #[test]
    fn tolerance_admits_small_excess() {
        let mut trace = uniform_trace(1, 0.0);
        trace.records[0].values[..3].copy_from_slice(&[0.5, 0.25, 0.25005]);
        trace.validate().unwrap();
    }

    #[test]
    fn rejects_negative_and_nan() {
        let mut trace = uniform_trace(1, 0.1);
        trace.records[0].values[4] = -0.01;
        assert!(matches!(trace.validate(), Err(TraceError::NegativeAttention { layer: 0, head: 1, index: 1, .. })));
        trace.records[0].values[4] = f32::NAN;
        assert!(matches!(trace.validate(), Err(TraceError::NonFinite { .. })));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = Vec::new();
        TraceWriter::new(&mut bytes, header(0)).unwrap().finish().unwrap();
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(TraceReader::new(&bad[..]), Err(TraceError::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(TraceReader::new(&bad[..]), Err(TraceError::UnsupportedVersion { found: 2 })));
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let trace = uniform_trace(2, 0.1);
        let mut bytes = Vec::new();
        let mut w = TraceWriter::new(&mut bytes, trace.header.clone()).unwrap();
        for r in &trace.records {
            w.write_record(&r.values).unwrap();
        }
        w.finish().unwrap();

        let cut = &bytes[..bytes.len() - 5];
        let err = TraceReader::new(cut).unwrap().into_trace().unwrap_err();
        assert!(matches!(err, TraceError::Truncated { record: 1, .. }));

        let mut long = bytes.clone();
        long.push(0);
        let err = TraceReader::new(&long[..]).unwrap().into_trace().unwrap_err();
        assert!(matches!(err, TraceError::TrailingBytes { records: 2 }));
    }

    #[test]
    fn writer_enforces_record_count() {
        let mut bytes = Vec::new();
        let w = TraceWriter::new(&mut bytes, header(1)).unwrap();
        assert!(matches!(w.finish(), Err(TraceError::RecordCount { expected: 1, found: 0 })));
    }

    #[test]
    fn streaming_yields_records_in_order() {
        let trace = uniform_trace(3, 0.05);
        let mut bytes = Vec::new();
        let mut w = TraceWriter::new(&mut bytes, trace.header.clone()).unwrap();
        for r in &trace.records {
            w.write_record(&r.values).unwrap();
        }
        w.finish().unwrap();
        let steps: Vec<usize> = TraceReader::new(&bytes[..]).unwrap().map(|r| r.unwrap().step_index).collect();
        assert_eq!(steps, vec![0, 1, 2]);
    }
}
