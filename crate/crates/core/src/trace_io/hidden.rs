use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::format::{
    expect_eof, open_buffered, read_f32_record, read_preamble, write_f32s, write_preamble,
    AHST_MAGIC,
};
use super::{Result, TraceError, TraceHeader};

/// Hidden states of one generated token, `[hidden_layer][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenRecord {
    pub step_index: usize,
    pub values: Vec<f32>,
}

impl HiddenRecord {
    /// Activations of the `k`-th entry of `hidden_layers`.
    pub fn layer(&self, dim: usize, k: usize) -> &[f32] {
        &self.values[k * dim..(k + 1) * dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTrace {
    pub header: TraceHeader,
    pub records: Vec<HiddenRecord>,
}

impl HiddenTrace {
    pub fn new(header: TraceHeader, records: Vec<HiddenRecord>) -> Result<Self> {
        let trace = Self { header, records };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        self.header.validate_hidden()?;
        if self.records.len() != self.header.num_generated {
            return Err(TraceError::RecordCount {
                expected: self.header.num_generated,
                found: self.records.len(),
            });
        }
        for (t, rec) in self.records.iter().enumerate() {
            validate_hidden_record(&self.header, t, &rec.values)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.header.hidden_dim.unwrap_or(0)
    }

    pub fn layers(&self) -> &[usize] {
        self.header.hidden_layers.as_deref().unwrap_or(&[])
    }
}

fn validate_hidden_record(header: &TraceHeader, step: usize, values: &[f32]) -> Result<()> {
    let expected = header.hidden_record_len();
    if values.len() != expected {
        return Err(TraceError::RecordLength { step, expected, found: values.len() });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(TraceError::NonFinite { step, index });
    }
    Ok(())
}

/// Streaming `AHST` reader.
pub struct HiddenReader<R> {
    inner: R,
    header: TraceHeader,
    next: usize,
    bytes: Vec<u8>,
    done: bool,
}

impl HiddenReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(open_buffered(path)?)
    }
}

impl<R: Read> HiddenReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let header = read_preamble(&mut inner, AHST_MAGIC)?;
        header.validate_hidden()?;
        Ok(Self { inner, header, next: 0, bytes: Vec::new(), done: false })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn read_next(&mut self) -> Result<Option<HiddenRecord>> {
        if self.next == self.header.num_generated {
            expect_eof(&mut self.inner, self.next)?;
            return Ok(None);
        }
        let mut values = vec![0f32; self.header.hidden_record_len()];
        read_f32_record(&mut self.inner, &mut self.bytes, &mut values, self.next)?;
        validate_hidden_record(&self.header, self.next, &values)?;
        let rec = HiddenRecord { step_index: self.next, values };
        self.next += 1;
        Ok(Some(rec))
    }

    pub fn into_trace(self) -> Result<HiddenTrace> {
        let header = self.header.clone();
        let records = self.collect::<Result<Vec<_>>>()?;
        Ok(HiddenTrace { header, records })
    }
}

impl<R: Read> Iterator for HiddenReader<R> {
    type Item = Result<HiddenRecord>;

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

pub fn read_hidden(path: impl AsRef<Path>) -> Result<HiddenTrace> {
    HiddenReader::open(path)?.into_trace()
}

pub struct HiddenWriter<W: Write> {
    inner: W,
    header: TraceHeader,
    written: usize,
}

impl<W: Write> HiddenWriter<W> {
    pub fn new(mut inner: W, header: TraceHeader) -> Result<Self> {
        header.validate_hidden()?;
        write_preamble(&mut inner, AHST_MAGIC, &header)?;
        Ok(Self { inner, header, written: 0 })
    }

    pub fn write_record(&mut self, values: &[f32]) -> Result<()> {
        if self.written == self.header.num_generated {
            return Err(TraceError::RecordCount {
                expected: self.header.num_generated,
                found: self.written + 1,
            });
        }
        validate_hidden_record(&self.header, self.written, values)?;
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

pub fn write_hidden(path: impl AsRef<Path>, trace: &HiddenTrace) -> Result<()> {
    trace.validate()?;
    let mut w = HiddenWriter::new(BufWriter::new(File::create(path)?), trace.header.clone())?;
    for rec in &trace.records {
        w.write_record(&rec.values)?;
    }
    w.finish()?;
    Ok(())
}
