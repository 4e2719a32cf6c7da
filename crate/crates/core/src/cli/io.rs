//! CSV artifacts. Every file has a header row and is read back by the same
//! row types that wrote it.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LswError, Result};

fn input_err(path: &Path, e: impl std::fmt::Display) -> LswError {
    LswError::Input(format!("{}: {e}", path.display()))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| input_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| input_err(path, e))?;
    }
    w.flush().map_err(|e| input_err(path, e))
}

/// Reads every row; ragged rows and unparseable fields are input errors
/// naming the record.
pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(|e| input_err(path, e))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub x: f64,
}

pub fn write_series(path: &Path, x: &[f64]) -> Result<()> {
    let rows: Vec<SeriesRow> = x.iter().map(|&x| SeriesRow { x }).collect();
    if rows.is_empty() {
        // serde writes no header for zero rows
        return std::fs::write(path, "x\n").map_err(|e| input_err(path, e));
    }
    write_rows(path, &rows)
}

pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(|e| input_err(path, e))?;
    if headers.len() != 1 || &headers[0] != "x" {
        return Err(input_err(path, "expected a single column with header `x`"));
    }
    let mut out = Vec::new();
    for row in r.deserialize::<SeriesRow>() {
        let v = row.map_err(|e| input_err(path, e))?.x;
        if !v.is_finite() {
            return Err(input_err(path, format!("non-finite value at row {}", out.len() + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub scale: i32,
    pub z0: f64,
    pub shat: f64,
    /// Selected interval `[lo, hi)` in observed time.
    pub lo: usize,
    pub hi: usize,
    pub sigma2: f64,
}

/// One audit record of the interval selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub scale: i32,
    pub z0: f64,
    pub r_lo: usize,
    pub r_hi: usize,
    pub u_lo: usize,
    pub u_hi: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodogramRow {
    pub scale: i32,
    pub k: usize,
    pub raw: f64,
    pub corrected: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRow {
    pub z0: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mse: f64,
    pub mad: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub bandwidth: usize,
    pub mse: f64,
    pub mad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub check: String,
    pub parameter: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let x = vec![0.1, -2.5e-17, 3.0, f64::MIN_POSITIVE];
        write_series(&p, &x).unwrap();
        assert_eq!(read_series(&p).unwrap(), x);
        write_series(&p, &[]).unwrap();
        assert_eq!(read_series(&p).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn malformed_series_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "x\n1\n2,3\n").unwrap();
        assert!(matches!(read_series(&p), Err(LswError::Input(_))));
        std::fs::write(&p, "y\n1\n").unwrap();
        assert!(read_series(&p).is_err());
        std::fs::write(&p, "x\n1\nabc\n").unwrap();
        assert!(read_series(&p).is_err());
        assert!(read_series(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let rows = vec![
            EstimateRow { scale: -1, z0: 0.025, shat: 0.123456789, lo: 3, hi: 40, sigma2: 1e-3 },
            EstimateRow { scale: -4, z0: 0.975, shat: -0.5, lo: 900, hi: 1000, sigma2: 0.25 },
        ];
        write_rows(&p, &rows).unwrap();
        assert_eq!(read_rows::<EstimateRow>(&p).unwrap(), rows);
        let ids = vec![IdentityRow { check: "a, b".into(), parameter: "J=4".into(), residual: 0.0, tolerance: 1e-8, pass: true }];
        write_rows(&p, &ids).unwrap();
        assert_eq!(read_rows::<IdentityRow>(&p).unwrap(), ids);
    }
}
