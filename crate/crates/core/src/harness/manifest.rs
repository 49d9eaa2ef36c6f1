use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::field_io::csv_error;
use crate::error::{Error, Result};

/// Reproducible record of a run: the config, its hash, and per-replicate
/// metrics. Wall-clock timings are kept out of the serialised manifest so
/// reruns compare byte for byte; they go to a separate CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    /// One row per replicate, in replicate order.
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, f64>,
    #[serde(skip)]
    pub timings: Vec<f64>,
}

/// SHA-256 of the compact JSON form of `config`, as lowercase hex.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(config).expect("config serialises");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { file: path.into(), message: e.to_string() })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_table(path, &self.columns, &self.rows)
    }

    pub fn write_timings(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.timings.iter().enumerate().map(|(r, t)| vec![r as f64, *t]).collect();
        write_table(path, &["replicate".to_string(), "seconds".to_string()], &rows)
    }
}

/// Values are written in their shortest round-trip form.
pub fn write_table(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(columns).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let columns = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse { file: path.into(), message: format!("`{s}`: {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let cols = vec!["a".to_string(), "b".to_string()];
        let rows = vec![vec![0.1 + 0.2, -1e-300], vec![std::f64::consts::PI, 12345.678901234567]];
        write_table(&p, &cols, &rows).unwrap();
        let (c, r) = read_table(&p).unwrap();
        assert_eq!(c, cols);
        assert_eq!(r, rows);
    }
}
