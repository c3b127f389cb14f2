use std::fs::File;
use std::io::{BufReader, ErrorKind, Read, Write};
use std::path::Path;

use super::{Result, TraceError, TraceHeader};

pub const FORMAT_VERSION: u32 = 1;

pub(crate) const ATRC_MAGIC: &[u8; 4] = b"ATRC";
pub(crate) const AHST_MAGIC: &[u8; 4] = b"AHST";
pub(crate) const AGDS_MAGIC: &[u8; 4] = b"AGDS";

/// File families recognised by their leading magic bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Attention,
    Hidden,
    Dataset,
}

/// Identifies a file by its first four bytes.
pub fn sniff_magic(path: impl AsRef<Path>) -> Result<FileKind> {
    let mut magic = [0u8; 4];
    let mut f = File::open(path)?;
    let got = read_full(&mut f, &mut magic)?;
    match &magic[..got] {
        m if m == ATRC_MAGIC => Ok(FileKind::Attention),
        m if m == AHST_MAGIC => Ok(FileKind::Hidden),
        m if m == AGDS_MAGIC => Ok(FileKind::Dataset),
        m => Err(TraceError::BadMagic {
            expected: "ATRC, AHST or AGDS".into(),
            found: String::from_utf8_lossy(m).into_owned(),
        }),
    }
}

pub(crate) fn open_buffered(path: impl AsRef<Path>) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Reads until `buf` is full or EOF; returns the number of bytes read.
pub(crate) fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

pub(crate) fn write_preamble<W: Write>(w: &mut W, magic: &[u8; 4], header: &TraceHeader) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len())
        .map_err(|_| TraceError::Header("header JSON longer than u32::MAX bytes".into()))?;
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

#[cfg(test)]
pub(crate) fn preamble_len(header: &TraceHeader) -> Result<usize> {
    Ok(12 + serde_json::to_vec(header)?.len())
}

pub(crate) fn read_preamble<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<TraceHeader> {
    let mut fixed = [0u8; 12];
    let got = read_full(r, &mut fixed)?;
    if got < 4 || &fixed[..4] != magic {
        return Err(TraceError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&fixed[..got.min(4)]).into_owned(),
        });
    }
    if got < 12 {
        return Err(TraceError::Header(format!("preamble truncated: {got} of 12 bytes")));
    }
    let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(TraceError::UnsupportedVersion { found: version });
    }
    let len = u32::from_le_bytes(fixed[8..12].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    let got = read_full(r, &mut json)?;
    if got < len {
        return Err(TraceError::Header(format!("header truncated: {got} of {len} bytes")));
    }
    Ok(serde_json::from_slice(&json)?)
}

/// Decodes one record of `out.len()` floats; `record` is used for error reporting.
pub(crate) fn read_f32_record<R: Read>(
    r: &mut R,
    bytes: &mut Vec<u8>,
    out: &mut [f32],
    record: usize,
) -> Result<()> {
    let need = out.len() * 4;
    bytes.resize(need, 0);
    let got = read_full(r, bytes)?;
    if got < need {
        return Err(TraceError::Truncated { record, expected: need, got });
    }
    for (v, c) in out.iter_mut().zip(bytes.chunks_exact(4)) {
        *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
    }
    Ok(())
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Errors if any byte remains after the declared records.
pub(crate) fn expect_eof<R: Read>(r: &mut R, records: usize) -> Result<()> {
    let mut probe = [0u8; 1];
    if read_full(r, &mut probe)? != 0 {
        return Err(TraceError::TrailingBytes { records });
    }
    Ok(())
}
