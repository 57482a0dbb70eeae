//! Loss accumulation curves: how much of a dataset-level total the
//! worst-scoring samples account for.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationCurve {
    /// Per-sample values, largest first.
    pub sorted: Vec<f64>,
    /// `cumulative[k]` is the fraction of the total held by the `k + 1` largest samples.
    pub cumulative: Vec<f64>,
    pub top25: f64,
    pub top50: f64,
}

impl AccumulationCurve {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(CliError::Config(format!("need at least 2 samples, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CliError::Config(format!("sample values must be finite and >= 0, got {v}")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = sorted.iter().sum();
        let n = sorted.len();
        let mut acc = 0.0;
        let cumulative = sorted
            .iter()
            .enumerate()
            .map(|(k, v)| {
                acc += v;
                if total > 0.0 { acc / total } else { (k + 1) as f64 / n as f64 }
            })
            .collect();
        let mut curve = Self { sorted, cumulative, top25: 0.0, top50: 0.0 };
        curve.top25 = curve.top_fraction(0.25);
        curve.top50 = curve.top_fraction(0.5);
        Ok(curve)
    }

    /// Share of the total held by the top `q` of samples, interpolating
    /// linearly inside the sample that straddles the cut.
    pub fn top_fraction(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let x = (q.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let whole = x.floor() as usize;
        let below = if whole == 0 { 0.0 } else { self.cumulative[whole - 1] };
        if whole >= n {
            return 1.0;
        }
        let step = self.cumulative[whole] - below;
        below + (x - whole as f64) * step
    }

    /// Rows `rank, percentile, value, cumulative`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "percentile", "value", "cumulative"])?;
        let n = self.sorted.len() as f64;
        for (k, (v, c)) in self.sorted.iter().zip(&self.cumulative).enumerate() {
            w.write_record([
                (k + 1).to_string(),
                crate::format::sig9((k + 1) as f64 / n),
                crate::format::sig9(*v),
                crate::format::sig9(*c),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?).unwrap())
    }
}

/// Reads one numeric column, by header name, from a CSV document.
pub fn read_column(reader: impl Read, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::Config(format!("column {column:?} not found; have {:?}", headers.iter().collect::<Vec<_>>())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("");
        let v = cell
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("row {}: {column} is not a number: {cell:?}", i + 2)))?;
        out.push(v);
    }
    Ok(out)
}
