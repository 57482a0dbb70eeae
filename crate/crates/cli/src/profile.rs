//! Per-pair gradient magnitude curves.

use pointsim::grad::{gradient_profile, Loss};
use pointsim::DcdParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::sig9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub l: f64,
    pub grad: f64,
}

/// `points` evenly spaced distances on `[0, l_max]`.
pub fn grid(l_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(l_max.is_finite() && l_max > 0.0) || points < 2 {
        return Err(CliError::Config("profile needs l_max > 0 and at least 2 points".into()));
    }
    Ok((0..points).map(|i| l_max * i as f64 / (points - 1) as f64).collect())
}

pub fn profile(loss: Loss, params: &DcdParams, l_grid: &[f64], n: u32) -> Result<Vec<ProfileRow>> {
    params.validate()?;
    if n == 0 {
        return Err(CliError::Config("n must be >= 1".into()));
    }
    Ok(gradient_profile(loss, params, l_grid, n).into_iter().map(|(l, grad)| ProfileRow { l, grad }).collect())
}

pub fn to_csv(rows: &[ProfileRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["l", "grad"])?;
    for r in rows {
        w.write_record([sig9(r.l), sig9(r.grad)])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?).unwrap())
}
