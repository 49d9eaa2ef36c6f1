use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::from_json;
use crate::error::{Error, Result};

pub const DTYPE: &str = "f64le";
pub const ORDERING: &str = "field-major, x fastest";

/// Sidecar describing a raw field payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub n_fields: usize,
    pub dtype: String,
    pub ordering: String,
}

impl FieldHeader {
    pub fn new(nx: usize, ny: usize, n_fields: usize) -> Self {
        FieldHeader { nx, ny, n_fields, dtype: DTYPE.into(), ordering: ORDERING.into() }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.n_fields
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub data: Vec<f64>,
}

impl FieldFile {
    /// Component `k` as a slice of `nx · ny` values.
    pub fn component(&self, k: usize) -> Result<&[f64]> {
        let n = self.header.nx * self.header.ny;
        self.data
            .get(k * n..(k + 1) * n)
            .ok_or_else(|| Error::arg(format!("field {k} out of range ({} fields)", self.header.n_fields)))
    }
}

/// `path` with `.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn check(header: &FieldHeader, len: usize) -> Result<()> {
    if header.dtype != DTYPE {
        return Err(Error::arg(format!("unsupported dtype `{}`", header.dtype)));
    }
    if header.len() != len {
        return Err(Error::arg(format!(
            "header describes {} values ({}x{}x{}), payload has {len}",
            header.len(),
            header.nx,
            header.ny,
            header.n_fields
        )));
    }
    Ok(())
}

/// Writes the little-endian payload to `path` and the header to `path.json`.
pub fn write_field(path: &Path, field: &[f64], meta: &FieldHeader) -> Result<()> {
    check(meta, field.len())?;
    let bytes: Vec<u8> = field.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta).expect("header serialises") + "\n")?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side)?;
    let header: FieldHeader = from_json(&text)
        .map_err(|(key, message)| Error::Parse { file: side.clone(), message: format!("at `{key}`: {message}") })?;
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse { file: path.into(), message: format!("payload of {} bytes is not whole f64s", bytes.len()) });
    }
    let data: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    check(&header, data.len()).map_err(|e| Error::Parse { file: path.into(), message: e.to_string() })?;
    Ok(FieldFile { header, data })
}

/// One row per node: `i, j, field_0, field_1, ...`. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_field_csv(path: &Path, field: &FieldFile) -> Result<()> {
    let h = &field.header;
    check(h, field.data.len())?;
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut head = vec!["i".to_string(), "j".to_string()];
    head.extend((0..h.n_fields).map(|k| format!("field_{k}")));
    w.write_record(&head).map_err(csv_error)?;
    let n = h.nx * h.ny;
    for j in 0..h.ny {
        for i in 0..h.nx {
            let k = i + h.nx * j;
            let mut row = vec![i.to_string(), j.to_string()];
            row.extend((0..h.n_fields).map(|f| format!("{:?}", field.data[f * n + k])));
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<FieldFile> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let n_fields = r.headers().map_err(csv_error)?.len().saturating_sub(2);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse { file: path.into(), message: format!("`{s}`: {e}") })
        };
        let vals = rec.iter().map(parse).collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    let nx = rows.iter().map(|r| r[0] as usize + 1).max().unwrap_or(0);
    let ny = rows.iter().map(|r| r[1] as usize + 1).max().unwrap_or(0);
    let n = nx * ny;
    if rows.len() != n {
        return Err(Error::Parse { file: path.into(), message: format!("{} rows for a {nx}x{ny} grid", rows.len()) });
    }
    let mut data = vec![0.0; n * n_fields];
    for r in &rows {
        let k = r[0] as usize + nx * r[1] as usize;
        for f in 0..n_fields {
            data[f * n + k] = r[2 + f];
        }
    }
    Ok(FieldFile { header: FieldHeader::new(nx, ny, n_fields), data })
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { file: PathBuf::new(), message: format!("{other:?}") },
    }
}
