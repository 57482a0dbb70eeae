//! Wall-clock timing of the metrics on synthetic pairs.
//!
//! Inputs are generated outside the timed region; each timed call includes
//! its own neighbour-index construction. Runs are sequential so timings do
//! not compete for cores.

use std::time::Instant;

use pointsim::degrade::{mix_noise_imbalance, synth_shapes, DegradationSpec, ShapeKind};
use pointsim::metrics::{chamfer, dcd, ChamferVariant};
use pointsim::rng::derive_seed;
use pointsim::sampling::fps;
use pointsim::transport::emd_approx;
use pointsim::{DcdParams, PointCloud};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::sig9;
use crate::sweep::Metric;

/// Deepest imbalance level.
pub const MAX_LEVEL: usize = 5;

fn default_levels() -> Vec<usize> {
    (0..=MAX_LEVEL).collect()
}
/// The auction is capped as in the reference timings; unconverged runs
/// still count, since the cap is part of what is being timed.
fn default_iters() -> usize {
    pointsim::transport::DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Imbalance levels. Level 0 is an undegraded resample of the ground
    /// truth; level `k > 0` keeps half the shape clean and draws
    /// `size * (2 - (k - 1) / 4)` points for the complete component, so
    /// levels 1 to 5 follow the imbalance axis of the noise/imbalance grid.
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "default_eps")]
    pub emd_eps: f64,
    #[serde(default = "default_iters")]
    pub emd_max_iters: usize,
}

fn default_eps() -> f64 {
    pointsim::transport::DEFAULT_EPS
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.iter().any(|&s| s < 64) {
            return Err(CliError::Config("sizes must be non-empty and each >= 64".into()));
        }
        if self.trials == 0 || self.levels.is_empty() {
            return Err(CliError::Config("trials and levels must be non-empty".into()));
        }
        if let Some(&l) = self.levels.iter().find(|&&l| l > MAX_LEVEL) {
            return Err(CliError::Config(format!("imbalance level {l} is above {MAX_LEVEL}")));
        }
        Ok(())
    }
}

pub fn level_spec(size: usize, level: usize, seed: u64) -> DegradationSpec {
    if level == 0 {
        DegradationSpec { seed, imbalance_n: size, partial_keep_fraction: 1.0, target_size: size, ..Default::default() }
    } else {
        DegradationSpec { seed, imbalance_n: size * (9 - level) / 4, partial_keep_fraction: 0.5, target_size: size, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub metric: Metric,
    pub size: usize,
    pub level: usize,
    pub median_secs: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub checks: Vec<OrderingCheck>,
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let t = Instant::now();
    let out = std::hint::black_box(f());
    (t.elapsed().as_secs_f64(), out)
}

fn pair(size: usize, level: usize, seed: u64, trial: usize) -> Result<(PointCloud, PointCloud)> {
    let kind = ShapeKind::ALL[trial % ShapeKind::ALL.len()];
    let (dense, _) = synth_shapes(kind, 4 * size, derive_seed(seed, &[size as u64, trial as u64]))?;
    let gt = fps(&dense, size, 0)?;
    let spec = level_spec(size, level, derive_seed(seed, &[size as u64, level as u64, trial as u64]));
    Ok((mix_noise_imbalance(&dense, &spec)?, gt))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let params = DcdParams::evaluation();
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        for &level in &cfg.levels {
            let mut times = [Vec::new(), Vec::new(), Vec::new()];
            for t in 0..cfg.trials {
                let (a, b) = pair(size, level, cfg.seed, t)?;
                times[0].push(time(|| chamfer(&a, &b, ChamferVariant::T)).0);
                let (secs, r) = time(|| dcd(&a, &b, &params));
                r?;
                times[1].push(secs);
                let (secs, r) = time(|| emd_approx(&a, &b, cfg.emd_eps, cfg.emd_max_iters));
                r?;
                times[2].push(secs);
            }
            for (metric, mut v) in [Metric::CdT, Metric::Dcd, Metric::Emd].into_iter().zip(times) {
                rows.push(BenchRow { metric, size, level, median_secs: median(&mut v), trials: cfg.trials });
            }
        }
    }
    let checks = ordering_checks(&rows);
    Ok(BenchReport { rows, checks })
}

fn find(rows: &[BenchRow], metric: Metric, size: usize, level: usize) -> Option<f64> {
    rows.iter().find(|r| r.metric == metric && r.size == size && r.level == level).map(|r| r.median_secs)
}

/// DCD at most 5x CD, EMD at least 10x DCD (on balanced pairs), and EMD time
/// non-decreasing across imbalance levels, for every benchmarked size.
pub fn ordering_checks(rows: &[BenchRow]) -> Vec<OrderingCheck> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.dedup();
    let mut levels: Vec<usize> = rows.iter().map(|r| r.level).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut out = Vec::new();
    for size in sizes {
        let base = levels[0];
        if let (Some(cd), Some(d), Some(e)) =
            (find(rows, Metric::CdT, size, base), find(rows, Metric::Dcd, size, base), find(rows, Metric::Emd, size, base))
        {
            out.push(OrderingCheck {
                name: format!("n={size}: time(dcd) <= 5 x time(cd)"),
                holds: d <= 5.0 * cd,
                detail: format!("ratio {}", sig9(d / cd)),
            });
            out.push(OrderingCheck {
                name: format!("n={size}: time(emd) >= 10 x time(dcd)"),
                holds: e >= 10.0 * d,
                detail: format!("ratio {}", sig9(e / d)),
            });
        }
        let emd: Vec<f64> = levels.iter().filter_map(|&l| find(rows, Metric::Emd, size, l)).collect();
        if emd.len() > 1 {
            out.push(OrderingCheck {
                name: format!("n={size}: emd time non-decreasing in imbalance"),
                holds: emd.windows(2).all(|w| w[1] >= w[0]),
                detail: emd.iter().map(|&s| sig9(s)).collect::<Vec<_>>().join(" <= "),
            });
        }
    }
    out
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "size", "level", "median_secs", "trials"])?;
        for r in &self.rows {
            w.write_record([r.metric.name(), &r.size.to_string(), &r.level.to_string(), &sig9(r.median_secs), &r.trials.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?).unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_bench() {
        let cfg = BenchConfig { sizes: vec![64], trials: 3, seed: 0, levels: vec![0, 2], emd_eps: 0.01, emd_max_iters: 100_000 };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.checks.len(), 3);
        assert!(r.rows.iter().all(|row| row.median_secs > 0.0));
        assert!(run_bench(&BenchConfig { sizes: vec![32], ..cfg }).is_err());
    }
}
