//! Grid sweeps of degradation parameters against a set of metrics.
//!
//! Every trial draws one synthetic shape (shared by all cells, so cells are
//! compared on the same ground truths) and every cell degrades it with its
//! own derived seed.

use std::fmt;
use std::str::FromStr;

use pointsim::degrade::{curvature_mix_sample, inject_outliers, mean_nn_spacing, mix_noise_imbalance, synth_shapes, DegradationSpec, ShapeKind};
use pointsim::metrics::{ChamferVariant, CloudPair};
use pointsim::rng::derive_seed;
use pointsim::sampling::fps;
use pointsim::transport::emd_approx;
use pointsim::{DcdParams, PointCloud};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    NoiseSigma,
    ImbalanceN,
    PartialKeepFraction,
    OutlierFraction,
    CurvatureRatio,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::NoiseSigma => "noise_sigma",
            AxisParam::ImbalanceN => "imbalance_n",
            AxisParam::PartialKeepFraction => "partial_keep_fraction",
            AxisParam::OutlierFraction => "outlier_fraction",
            AxisParam::CurvatureRatio => "curvature_ratio",
        }
    }

    fn apply(self, spec: &mut DegradationSpec, v: f64) {
        match self {
            AxisParam::NoiseSigma => spec.noise_sigma = v,
            AxisParam::ImbalanceN => spec.imbalance_n = v as usize,
            AxisParam::PartialKeepFraction => spec.partial_keep_fraction = v,
            AxisParam::OutlierFraction => spec.outlier_fraction = v,
            AxisParam::CurvatureRatio => spec.curvature_ratio = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: AxisParam,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn single(param: AxisParam, v: f64) -> Self {
        Self { param, values: vec![v] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "cd-t")]
    CdT,
    #[serde(rename = "cd-p")]
    CdP,
    #[serde(rename = "hd")]
    Hd,
    #[serde(rename = "dcd")]
    Dcd,
    #[serde(rename = "emd")]
    Emd,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::CdT, Metric::CdP, Metric::Hd, Metric::Dcd, Metric::Emd];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CdT => "cd-t",
            Metric::CdP => "cd-p",
            Metric::Hd => "hd",
            Metric::Dcd => "dcd",
            Metric::Emd => "emd",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown metric {s:?} (expected cd-t, cd-p, hd, dcd or emd)")))
    }
}

fn default_trials() -> usize {
    20
}
fn default_shapes() -> Vec<ShapeKind> {
    ShapeKind::ALL.to_vec()
}
fn default_dense() -> usize {
    20480
}
fn default_scale() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_eps() -> f64 {
    pointsim::transport::DEFAULT_EPS
}
fn default_iters() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<ShapeKind>,
    /// Size of the dense surface sample the ground truth is drawn from.
    #[serde(default = "default_dense")]
    pub dense_size: usize,
    /// Uniform scale applied to the synthetic shapes.
    #[serde(default = "default_scale")]
    pub shape_scale: f64,
    /// Read `noise_sigma` as a multiple of the ground truth's mean nearest-neighbour spacing.
    #[serde(default = "default_true")]
    pub sigma_in_spacing: bool,
    pub rows: Axis,
    pub cols: Axis,
    #[serde(default)]
    pub base: DegradationSpec,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub dcd: DcdParams,
    #[serde(default = "default_eps")]
    pub emd_eps: f64,
    #[serde(default = "default_iters")]
    pub emd_max_iters: usize,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("sweep config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.shapes.is_empty() || self.metrics.is_empty() {
            return bad("shapes and metrics must be non-empty".into());
        }
        if self.dense_size < self.base.target_size.max(64) {
            return bad(format!("dense_size {} is below target_size {}", self.dense_size, self.base.target_size));
        }
        if !(self.shape_scale.is_finite() && self.shape_scale > 0.0) {
            return bad("shape_scale must be > 0".into());
        }
        if self.rows.param == self.cols.param {
            return bad("rows and cols must sweep different parameters".into());
        }
        let curvature = self.curvature_mode();
        for axis in [&self.rows, &self.cols] {
            if axis.values.is_empty() {
                return bad(format!("axis {} has no values", axis.param.name()));
            }
            if curvature && matches!(axis.param, AxisParam::NoiseSigma | AxisParam::ImbalanceN | AxisParam::PartialKeepFraction) {
                return bad(format!("{} cannot be swept together with curvature_ratio", axis.param.name()));
            }
            if axis.param == AxisParam::ImbalanceN && axis.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
                return bad("imbalance_n values must be positive integers".into());
            }
        }
        for (i, j) in self.cells() {
            self.cell_spec(i, j, 0, 1.0).validate()?;
        }
        self.dcd.validate()?;
        if self.emd_eps.is_nan() || self.emd_eps <= 0.0 || self.emd_max_iters == 0 {
            return bad("emd_eps must be > 0 and emd_max_iters >= 1".into());
        }
        Ok(())
    }

    fn curvature_mode(&self) -> bool {
        self.rows.param == AxisParam::CurvatureRatio || self.cols.param == AxisParam::CurvatureRatio
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows.values.len()).flat_map(move |i| (0..self.cols.values.len()).map(move |j| (i, j)))
    }

    /// Degradation recipe of cell `(i, j)` in trial `t`, noise already in absolute units.
    pub fn cell_spec(&self, i: usize, j: usize, t: usize, spacing: f64) -> DegradationSpec {
        let mut spec = self.base.clone();
        self.rows.param.apply(&mut spec, self.rows.values[i]);
        self.cols.param.apply(&mut spec, self.cols.values[j]);
        if self.sigma_in_spacing {
            spec.noise_sigma *= spacing;
        }
        spec.seed = derive_seed(self.master_seed, &[1, i as u64, j as u64, t as u64]);
        spec
    }
}

/// Ground truth of one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub kind: ShapeKind,
    pub dense: PointCloud,
    pub curvatures: Vec<f64>,
    pub gt: PointCloud,
    pub spacing: f64,
}

pub fn make_trial(cfg: &SweepConfig, t: usize) -> Result<Trial> {
    let kind = cfg.shapes[t % cfg.shapes.len()];
    let (dense, curvatures) = synth_shapes(kind, cfg.dense_size, derive_seed(cfg.master_seed, &[0, t as u64]))?;
    let s = cfg.shape_scale;
    let dense = if s == 1.0 { dense } else { dense.map(|p| *p * s)? };
    let curvatures = curvatures.into_iter().map(|k| k / s).collect();
    let gt = fps(&dense, cfg.base.target_size, 0)?;
    let spacing = mean_nn_spacing(&gt);
    Ok(Trial { kind, dense, curvatures, gt, spacing })
}

/// The degraded cloud of cell `(i, j)` in `trial`.
pub fn degrade_cell(cfg: &SweepConfig, trial: &Trial, i: usize, j: usize, t: usize) -> Result<PointCloud> {
    let spec = cfg.cell_spec(i, j, t, trial.spacing);
    let cloud = if cfg.curvature_mode() {
        curvature_mix_sample(&trial.dense, &trial.curvatures, spec.curvature_ratio, spec.target_size, spec.seed)?
    } else {
        mix_noise_imbalance(&trial.dense, &spec)?
    };
    if spec.outlier_fraction > 0.0 {
        let radius = spec.outlier_radius * cfg.shape_scale;
        Ok(inject_outliers(&cloud, spec.outlier_fraction, radius, derive_seed(spec.seed, &[2]))?)
    } else {
        Ok(cloud)
    }
}

/// Evaluates `metrics` between a degraded cloud and its ground truth.
pub fn evaluate(
    metrics: &[Metric],
    cloud: &PointCloud,
    gt: &PointCloud,
    dcd: &DcdParams,
    emd_eps: f64,
    emd_max_iters: usize,
) -> Result<Vec<f64>> {
    let pair = CloudPair::new(cloud, gt);
    metrics
        .iter()
        .map(|m| {
            Ok(match m {
                Metric::CdT => pair.chamfer(ChamferVariant::T).value,
                Metric::CdP => pair.chamfer(ChamferVariant::P).value,
                Metric::Hd => pair.hausdorff(),
                Metric::Dcd => pair.dcd(dcd)?.value,
                Metric::Emd => {
                    let r = emd_approx(cloud, gt, emd_eps, emd_max_iters)?;
                    r.total_cost / cloud.len() as f64
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub row: usize,
    pub col: usize,
    pub row_value: f64,
    pub col_value: f64,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
}

/// One metric vector per (cell, trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub row: usize,
    pub col: usize,
    pub trial: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub master_seed: u64,
    pub trials: usize,
    pub sigma_in_spacing: bool,
    pub rows: Axis,
    pub cols: Axis,
    pub metrics: Vec<Metric>,
    /// Row-major over (row, col), metrics innermost.
    pub cells: Vec<CellStats>,
}

impl SweepReport {
    pub fn mean(&self, metric: Metric, row: usize, col: usize) -> f64 {
        self.cell(metric, row, col).mean
    }

    pub fn cell(&self, metric: Metric, row: usize, col: usize) -> &CellStats {
        let k = self.metrics.iter().position(|&m| m == metric).expect("metric not in report");
        &self.cells[(row * self.cols.values.len() + col) * self.metrics.len() + k]
    }

    /// Means as `grid[row][col]`.
    pub fn grid(&self, metric: Metric) -> Vec<Vec<f64>> {
        (0..self.rows.values.len())
            .map(|i| (0..self.cols.values.len()).map(|j| self.mean(metric, i, j)).collect())
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row_param", "row_value", "col_param", "col_value", "metric", "mean", "std", "trials"])?;
        for c in &self.cells {
            w.write_record([
                self.rows.param.name(),
                &sig9(c.row_value),
                self.cols.param.name(),
                &sig9(c.col_value),
                c.metric.name(),
                &sig9(c.mean),
                &sig9(c.std),
                &self.trials.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?).unwrap())
    }
}

pub fn samples_csv(report: &SweepReport, samples: &[Sample]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![report.rows.param.name().to_string(), report.cols.param.name().to_string(), "trial".into()];
    header.extend(report.metrics.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for s in samples {
        let mut rec = vec![sig9(report.rows.values[s.row]), sig9(report.cols.values[s.col]), s.trial.to_string()];
        rec.extend(s.values.iter().map(|&v| sig9(v)));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?).unwrap())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<(SweepReport, Vec<Sample>)> {
    cfg.validate()?;
    let trials: Vec<Trial> = (0..cfg.trials).into_par_iter().map(|t| make_trial(cfg, t)).collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize, usize)> =
        cfg.cells().flat_map(|(i, j)| (0..cfg.trials).map(move |t| (i, j, t))).collect();
    let samples: Vec<Sample> = tasks
        .into_par_iter()
        .map(|(i, j, t)| {
            let trial = &trials[t];
            let cloud = degrade_cell(cfg, trial, i, j, t)?;
            let values = evaluate(&cfg.metrics, &cloud, &trial.gt, &cfg.dcd, cfg.emd_eps, cfg.emd_max_iters)?;
            Ok(Sample { row: i, col: j, trial: t, values })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (cell, (i, j)) in cfg.cells().enumerate() {
        let chunk = &samples[cell * cfg.trials..(cell + 1) * cfg.trials];
        for (k, &metric) in cfg.metrics.iter().enumerate() {
            let vals: Vec<f64> = chunk.iter().map(|s| s.values[k]).collect();
            let (mean, std) = mean_std(&vals);
            cells.push(CellStats { row: i, col: j, row_value: cfg.rows.values[i], col_value: cfg.cols.values[j], metric, mean, std });
        }
    }
    let report = SweepReport {
        master_seed: cfg.master_seed,
        trials: cfg.trials,
        sigma_in_spacing: cfg.sigma_in_spacing,
        rows: cfg.rows.clone(),
        cols: cfg.cols.clone(),
        metrics: cfg.metrics.clone(),
        cells,
    };
    Ok((report, samples))
}
