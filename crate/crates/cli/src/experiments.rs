//! Seeded reproductions of the sensitivity experiments, shared by the CLI
//! and the acceptance suite.

use pointsim::degrade::{inject_outliers, mean_nn_spacing, mix_noise_imbalance, synth_shapes, DegradationSpec, ShapeKind, SPHERE_RADIUS};
use pointsim::dsample::{guided_downsample_detailed, planted_outlier_instance, plain_downsample, OracleScorer, SamplerParams, ScoredCloud, Scorer};
use pointsim::metrics::{chamfer, dcd, ChamferVariant};
use pointsim::rng::{derive_seed, stream};
use pointsim::sampling::fps;
use pointsim::{DcdParams, PointCloud};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulate::AccumulationCurve;
use crate::error::Result;
use crate::sweep::{Axis, AxisParam, Metric, SweepConfig, SweepReport};

/// The noise/imbalance grid used to reproduce the noise-imbalance matrix.
///
/// Columns run from the least to the most imbalanced mixture (fewer complete
/// noisy points next to a fixed clean partial component); rows add noise in
/// units of the ground truth's mean point spacing.
pub fn noise_imbalance_config(master_seed: u64) -> SweepConfig {
    SweepConfig {
        master_seed,
        trials: 20,
        shapes: ShapeKind::ALL.to_vec(),
        dense_size: 20480,
        shape_scale: 0.3,
        sigma_in_spacing: true,
        rows: Axis { param: AxisParam::NoiseSigma, values: vec![0.0, 0.1, 0.2, 0.3, 0.4] },
        cols: Axis { param: AxisParam::ImbalanceN, values: vec![4096.0, 3584.0, 3072.0, 2560.0, 2048.0] },
        base: DegradationSpec { partial_keep_fraction: 0.5, target_size: 2048, ..Default::default() },
        metrics: Metric::ALL.to_vec(),
        dcd: DcdParams::evaluation(),
        emd_eps: pointsim::transport::DEFAULT_EPS,
        emd_max_iters: 100_000,
    }
}

/// `(max - min) / mean`.
pub fn relative_range(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::MIN, f64::max);
    let min = v.iter().copied().fold(f64::MAX, f64::min);
    (max - min) / (v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseImbalanceAnalysis {
    /// Lowest-noise row: relative range of CD-T over that of DCD.
    pub cd_t_range_ratio: f64,
    pub cd_p_range_ratio: f64,
    /// Per noise row, adjacent imbalance steps where DCD goes down.
    pub dcd_inversions: Vec<usize>,
    /// Adjacent-cell comparisons (along both axes) where EMD and DCD move the same way.
    pub trend_agree: usize,
    pub trend_total: usize,
    /// Highest-noise row: CD-T at the most imbalanced column vs the least.
    pub cd_t_crossover: bool,
    pub cd_p_crossover: bool,
}

impl NoiseImbalanceAnalysis {
    pub fn from_report(r: &SweepReport) -> Self {
        let (cdt, cdp, d, e) = (r.grid(Metric::CdT), r.grid(Metric::CdP), r.grid(Metric::Dcd), r.grid(Metric::Emd));
        let rows = d.len();
        let cols = d[0].len();
        let dcd_range = relative_range(&d[0]);
        let dcd_inversions = d.iter().map(|row| row.windows(2).filter(|w| w[1] < w[0]).count()).collect();
        let (mut agree, mut total) = (0, 0);
        for i in 0..rows {
            for j in 0..cols {
                let mut cmp = |a: (usize, usize)| {
                    total += 1;
                    if (e[a.0][a.1] - e[i][j]).signum() == (d[a.0][a.1] - d[i][j]).signum() {
                        agree += 1;
                    }
                };
                if j + 1 < cols {
                    cmp((i, j + 1));
                }
                if i + 1 < rows {
                    cmp((i + 1, j));
                }
            }
        }
        let last = rows - 1;
        Self {
            cd_t_range_ratio: relative_range(&cdt[0]) / dcd_range,
            cd_p_range_ratio: relative_range(&cdp[0]) / dcd_range,
            dcd_inversions,
            trend_agree: agree,
            trend_total: total,
            cd_t_crossover: cdt[last][cols - 1] <= cdt[last][0],
            cd_p_crossover: cdp[last][cols - 1] <= cdp[last][0],
        }
    }

    pub fn range_ok(&self) -> bool {
        self.cd_t_range_ratio < 0.2
    }

    pub fn monotone_ok(&self) -> bool {
        self.dcd_inversions.iter().all(|&k| k <= 1)
    }

    pub fn agreement(&self) -> f64 {
        self.trend_agree as f64 / self.trend_total as f64
    }

    pub fn agreement_ok(&self) -> bool {
        self.agreement() >= 0.8
    }
}

/// `count` ground-truth/degraded pairs with random noise, imbalance and
/// occasional far outliers.
pub fn degraded_set(count: usize, seed: u64, alphas: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let rows: Vec<(f64, Vec<f64>)> = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(seed, &[s as u64]);
            let kind = ShapeKind::ALL[s % ShapeKind::ALL.len()];
            let (dense, _) = synth_shapes(kind, 8192, derive_seed(seed, &[s as u64, 1]))?;
            let gt = fps(&dense, 2048, 0)?;
            let spacing = mean_nn_spacing(&gt);
            let spec = DegradationSpec {
                seed: derive_seed(seed, &[s as u64, 2]),
                noise_sigma: rng.random_range(0.0..3.0) * spacing,
                imbalance_n: rng.random_range(256..=4096),
                partial_keep_fraction: rng.random_range(0.5..=1.0),
                ..Default::default()
            };
            let mut out = mix_noise_imbalance(&dense, &spec)?;
            if rng.random_bool(0.3) {
                let fraction = rng.random_range(0.001..0.02);
                out = inject_outliers(&out, fraction, rng.random_range(1.0..3.0), derive_seed(seed, &[s as u64, 3]))?;
            }
            let cd = chamfer(&out, &gt, ChamferVariant::T).value;
            let d = alphas
                .iter()
                .map(|&a| dcd(&out, &gt, &DcdParams::evaluation().with_alpha(a)).map(|r| r.value))
                .collect::<pointsim::Result<Vec<f64>>>()?;
            Ok((cd, d))
        })
        .collect::<Result<_>>()?;
    let cd = rows.iter().map(|r| r.0).collect();
    let d = (0..alphas.len()).map(|k| rows.iter().map(|r| r.1[k]).collect()).collect();
    Ok((cd, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationComparison {
    pub cd_t: AccumulationCurve,
    pub dcd: AccumulationCurve,
}

pub fn accumulation_comparison(count: usize, seed: u64) -> Result<AccumulationComparison> {
    let (cd, d) = degraded_set(count, seed, &[1000.0])?;
    Ok(AccumulationComparison { cd_t: AccumulationCurve::new(&cd)?, dcd: AccumulationCurve::new(&d[0])? })
}

/// Kendall rank correlation (tau-b, so tied pairs are handled).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mut concordant, mut discordant, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let a = (x[i] - x[j]).signum() as i64 * i64::from(x[i] != x[j]);
            let b = (y[i] - y[j]).signum() as i64 * i64::from(y[i] != y[j]);
            match (a, b) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant) as f64;
    let denom = ((n0 + tx as f64) * (n0 + ty as f64)).sqrt();
    if denom == 0.0 {
        return 1.0;
    }
    (concordant - discordant) as f64 / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaConsistency {
    pub alphas: Vec<f64>,
    /// Kendall tau between rankings at consecutive alphas.
    pub taus: Vec<f64>,
}

pub fn alpha_consistency(count: usize, seed: u64, alphas: &[f64]) -> Result<AlphaConsistency> {
    let (_, d) = degraded_set(count, seed, alphas)?;
    let taus = d.windows(2).map(|w| kendall_tau(&w[0], &w[1])).collect();
    Ok(AlphaConsistency { alphas: alphas.to_vec(), taus })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSensitivity {
    pub n1: usize,
    pub n2: usize,
    pub d: f64,
    pub dcd_delta: f64,
    pub dcd_bound: f64,
    pub cd_t_delta: f64,
    pub cd_t_bound: f64,
}

/// One point of a sphere sample pushed radially out to distance `d`, then
/// to `10 d`; compares how much each measure moves between the two.
pub fn outlier_sensitivity(n: usize, d: f64, seed: u64) -> Result<OutlierSensitivity> {
    let (dense, _) = synth_shapes(ShapeKind::Sphere, 4 * n, seed)?;
    let s1 = fps(&dense, n, 0)?;
    let moved = |dist: f64| -> Result<PointCloud> {
        let mut pts = s1.points().to_vec();
        let p = pts[0];
        pts[0] = p + p * (dist / SPHERE_RADIUS);
        Ok(PointCloud::new(pts)?)
    };
    let (near, far) = (moved(d)?, moved(10.0 * d)?);
    let p = DcdParams::evaluation();
    let dcd_delta = (dcd(&s1, &far, &p)?.value - dcd(&s1, &near, &p)?.value).abs();
    let cd_t_delta = chamfer(&s1, &far, ChamferVariant::T).value - chamfer(&s1, &near, ChamferVariant::T).value;
    Ok(OutlierSensitivity {
        n1: s1.len(),
        n2: far.len(),
        d,
        dcd_delta,
        dcd_bound: 1.0 / s1.len() as f64 + 1.0 / far.len() as f64 + 1e-6,
        cd_t_delta,
        cd_t_bound: 99.0 * d * d / s1.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleBenchmark {
    pub seeds: usize,
    /// Seeds where guided sampling gave a lower CD-T to the ground truth than plain FPS.
    pub wins: usize,
    pub outlier_replicas: usize,
    pub outlier_survivors: usize,
    pub outlier_expected: f64,
    pub outlier_sd: f64,
    pub max_outlier_p: f64,
    pub replica_survivors: usize,
    pub replica_expected: f64,
    pub replica_sd: f64,
}

pub fn downsample_benchmark(seeds: usize, params: &SamplerParams) -> Result<DownsampleBenchmark> {
    struct Row {
        win: bool,
        out: (usize, usize, f64, f64, f64),
        all: (usize, f64, f64),
    }
    let rows: Vec<Row> = (0..seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let inst = planted_outlier_instance(seed)?;
            let z = OracleScorer { t: params.t }.score(&inst.coarse, Some(&inst.gt))?;
            let scored = ScoredCloud::new(inst.coarse.clone(), z)?;
            let m = inst.gt.len();
            let out = guided_downsample_detailed(&scored, &inst.rec, params, m, seed)?;
            let plain = plain_downsample(&inst.coarse, &inst.rec, params.upscale, m, seed)?;
            let win = chamfer(&out.cloud, &inst.gt, ChamferVariant::T).value < chamfer(&plain, &inst.gt, ChamferVariant::T).value;
            let s = params.upscale;
            let survived = |k: usize| out.survivors.binary_search(&k).is_ok();
            let (mut n, mut hit, mut e, mut v, mut pmax) = (0, 0, 0.0, 0.0, 0.0f64);
            for &o in &inst.outliers {
                let p = out.probabilities[o];
                pmax = pmax.max(p);
                for r in 0..s {
                    n += 1;
                    hit += usize::from(survived(o * s + r));
                    e += p;
                    v += p * (1.0 - p);
                }
            }
            let ae: f64 = out.probabilities.iter().map(|p| s as f64 * p).sum();
            let av: f64 = out.probabilities.iter().map(|p| s as f64 * p * (1.0 - p)).sum();
            Ok(Row { win, out: (n, hit, e, v, pmax), all: (out.survivors.len(), ae, av) })
        })
        .collect::<Result<_>>()?;
    let mut b = DownsampleBenchmark {
        seeds,
        wins: 0,
        outlier_replicas: 0,
        outlier_survivors: 0,
        outlier_expected: 0.0,
        outlier_sd: 0.0,
        max_outlier_p: 0.0,
        replica_survivors: 0,
        replica_expected: 0.0,
        replica_sd: 0.0,
    };
    let (mut ov, mut av) = (0.0, 0.0);
    for r in rows {
        b.wins += usize::from(r.win);
        b.outlier_replicas += r.out.0;
        b.outlier_survivors += r.out.1;
        b.outlier_expected += r.out.2;
        ov += r.out.3;
        b.max_outlier_p = b.max_outlier_p.max(r.out.4);
        b.replica_survivors += r.all.0;
        b.replica_expected += r.all.1;
        av += r.all.2;
    }
    b.outlier_sd = ov.sqrt();
    b.replica_sd = av.sqrt();
    Ok(b)
}

impl DownsampleBenchmark {
    /// Observed outlier survivors within three standard deviations of the
    /// Bernoulli expectation. A zero-variance model admits no deviation.
    pub fn outliers_within_3sd(&self) -> bool {
        (self.outlier_survivors as f64 - self.outlier_expected).abs() <= 3.0 * self.outlier_sd.max(0.0) + 0.5
    }

    pub fn replicas_within_3sd(&self) -> bool {
        (self.replica_survivors as f64 - self.replica_expected).abs() <= 3.0 * self.replica_sd
    }
}
