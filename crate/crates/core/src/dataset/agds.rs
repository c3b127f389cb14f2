//! `AGDS` v1 dataset files.
//!
//! ```text
//! "AGDS" | u32 version | u32 rows | u32 cols | rows·cols f32 LE (row-major) | rows label bytes
//! ```
//!
//! Feature names, source ids and an optional fitted scaler live in a JSON
//! sidecar next to the binary file (`<file>.json`). Features are stored as
//! `f32`, so values read back are the `f32` rounding of the in-memory `f64`s.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetError, MinMaxScaler, Result, SourceId, WindowedDataset};
use crate::matrix::Matrix;
use crate::trace_io::FORMAT_VERSION;

const MAGIC: &[u8; 4] = b"AGDS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub feature_names: Vec<String>,
    pub source_ids: Vec<SourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<MinMaxScaler>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &WindowedDataset, scaler: Option<&MinMaxScaler>) -> Result<()> {
    let path = path.as_ref();
    ds.check_finite()?;
    let rows = u32::try_from(ds.num_rows()).map_err(|_| DatasetError::Format("too many rows".into()))?;
    let cols = u32::try_from(ds.num_features()).map_err(|_| DatasetError::Format("too many columns".into()))?;
    if ds.x.ncols() != ds.num_features() && ds.num_rows() > 0 {
        return Err(DatasetError::DimensionMismatch { expected: ds.num_features(), found: ds.x.ncols() });
    }

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for v in ds.x.as_slice() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.write_all(&ds.y)?;
    w.flush()?;

    let sidecar = DatasetSidecar {
        feature_names: ds.feature_names.clone(),
        source_ids: ds.source_ids.clone(),
        scaler: scaler.cloned(),
    };
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(WindowedDataset, Option<MinMaxScaler>)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let mut fixed = [0u8; 16];
    read_exact_or(&mut r, &mut fixed, "preamble")?;
    if &fixed[..4] != MAGIC {
        return Err(DatasetError::Format(format!(
            "bad magic {:?}, expected \"AGDS\"",
            String::from_utf8_lossy(&fixed[..4])
        )));
    }
    let word = |i: usize| u32::from_le_bytes(fixed[i..i + 4].try_into().unwrap());
    if word(4) != FORMAT_VERSION {
        return Err(DatasetError::Format(format!("unsupported version {}", word(4))));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;

    let mut bytes = vec![0u8; rows * cols * 4];
    read_exact_or(&mut r, &mut bytes, "feature matrix")?;
    let data: Vec<f64> =
        bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
    let mut y = vec![0u8; rows];
    read_exact_or(&mut r, &mut y, "labels")?;
    if y.iter().any(|&l| l > 1) {
        return Err(DatasetError::Format("label byte other than 0 or 1".into()));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(DatasetError::Format("trailing bytes after labels".into()));
    }

    let sidecar: DatasetSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    if sidecar.feature_names.len() != cols {
        return Err(DatasetError::DimensionMismatch { expected: cols, found: sidecar.feature_names.len() });
    }
    if sidecar.source_ids.len() != rows {
        return Err(DatasetError::Format(format!(
            "sidecar lists {} source ids for {rows} rows",
            sidecar.source_ids.len()
        )));
    }
    let ds = WindowedDataset {
        x: Matrix::from_vec(rows, cols, data),
        y,
        feature_names: sidecar.feature_names,
        source_ids: sidecar.source_ids,
    };
    ds.check_finite()?;
    Ok((ds, sidecar.scaler))
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => DatasetError::Format(format!("truncated {what}")),
        _ => DatasetError::Io(e),
    })
}
