//! Field snapshot files.
//!
//! Binary layout, all little-endian: `extent: f64`, `points_per_axis: u64`,
//! `time: f64`, then `M·M` pairs `(re: f64, im: f64)` in row-major order
//! (x index slowest). A JSON sidecar with the same metadata sits next to the
//! binary file with the extension replaced by `.json`.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, GridSpec};

const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub extent: f64,
    pub points_per_axis: usize,
    pub time: f64,
    pub layout: String,
    pub binary: String,
}

pub fn encode(field: &ComplexField2D) -> Vec<u8> {
    let g = field.grid();
    let m = g.points_per_axis();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * m * m);
    out.extend_from_slice(&g.extent().to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&field.time().to_le_bytes());
    for v in field.values().iter() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ComplexField2D> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("snapshot shorter than its header".into()));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let extent = f(0);
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let time = f(16);
    let grid = GridSpec::new(extent, m)?;
    let expected = HEADER_LEN + 16 * m * m;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(m * m);
    for k in 0..m * m {
        let o = HEADER_LEN + 16 * k;
        values.push(Complex64::new(f(o), f(o + 8)));
    }
    let values = Array2::from_shape_vec((m, m), values).map_err(|e| Error::Format(e.to_string()))?;
    ComplexField2D::new(grid, values, time)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the binary snapshot and its JSON sidecar.
pub fn write(path: &Path, field: &ComplexField2D) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode(field))?;
    w.flush()?;
    let meta = SnapshotMeta {
        extent: field.grid().extent(),
        points_per_axis: field.grid().points_per_axis(),
        time: field.time(),
        layout: "row-major, x index slowest, (re, im) f64 little-endian".into(),
        binary: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<ComplexField2D> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
