//! Density-aware point scoring and guided down-sampling.
//!
//! A point's importance target `g(x)` is negative for points of the coarse
//! cloud that the ground truth queries (more negative when queried more) and
//! a scaled distance-to-surface for points nobody queries. Scores `z` map to
//! an existence probability `p = sigmoid(-beta * z - gamma)`; the pipeline
//! up-samples the coarse cloud, thins each replica with its point's
//! probability, merges the reconstruction and finishes with FPS.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::degrade::{half_space_cut, mean_nn_spacing, synth_shapes, ShapeKind};
use crate::error::{Error, Result};
use crate::index::NeighborIndex;
use crate::metrics::query_frequencies;
use crate::rng;
use crate::sampling::fps;

/// Fraction of the mean nearest-neighbour spacing used as replica jitter.
pub const JITTER_SPACING_FRACTION: f64 = 0.25;
/// Unqueried-distance percentile mapped to `TARGET_AT_PERCENTILE` when `t` is calibrated.
pub const T_CALIBRATION_PERCENTILE: f64 = 0.95;
pub const TARGET_AT_PERCENTILE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCloud {
    cloud: PointCloud,
    scores: Vec<f64>,
}

impl ScoredCloud {
    pub fn new(cloud: PointCloud, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != cloud.len() {
            return Err(Error::ShapeMismatch { left: cloud.len(), right: scores.len() });
        }
        if let Some(i) = scores.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidParam(format!("score {i} is not finite")));
        }
        Ok(Self { cloud, scores })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerParams {
    pub beta: f64,
    pub gamma: f64,
    /// Distance scale of `g(x)` for unqueried points; `None` calibrates it per instance.
    pub t: Option<f64>,
    /// Replicas per coarse point.
    pub upscale: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { beta: 9.0, gamma: 1.0, t: None, upscale: 2 }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidParam("beta and gamma must be finite".into()));
        }
        if let Some(t) = self.t {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParam(format!("t must be > 0, got {t}")));
            }
        }
        if self.upscale == 0 {
            return Err(Error::InvalidParam("upscale must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per coarse point: number of ground-truth points whose nearest coarse
/// point it is, and its distance to the nearest ground-truth point.
fn coarse_statistics(coarse: &PointCloud, gt: &PointCloud, gt_index: &NeighborIndex) -> (Vec<u32>, Vec<f64>) {
    let counts = query_frequencies(gt, &NeighborIndex::new(coarse)).counts;
    let dists = coarse.points().iter().map(|p| gt_index.nearest_one(p).1.sqrt()).collect();
    (counts, dists)
}

/// Importance target `g(x)` for every coarse point.
pub fn g_target(coarse: &PointCloud, gt: &PointCloud, gt_index: &NeighborIndex, t: f64) -> Result<Vec<f64>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParam(format!("t must be > 0, got {t}")));
    }
    if gt_index.len() != gt.len() {
        return Err(Error::ShapeMismatch { left: gt.len(), right: gt_index.len() });
    }
    let (counts, dists) = coarse_statistics(coarse, gt, gt_index);
    let ratio = coarse.len() as f64 / gt.len() as f64;
    Ok(counts.iter().zip(&dists).map(|(&n, &d)| g_value(n, d, ratio, t)).collect())
}

/// `d * t` when unqueried, `-log2(ratio * n + 1)` otherwise.
pub fn g_value(n: u32, dist: f64, ratio: f64, t: f64) -> f64 {
    if n == 0 {
        dist * t
    } else {
        -(ratio * n as f64 + 1.0).log2()
    }
}

/// Scale `t` that maps the 95th-percentile distance of unqueried coarse
/// points to +2. Falls back to 1 when no unqueried point is off the surface.
pub fn calibrate_t(coarse: &PointCloud, gt: &PointCloud, gt_index: &NeighborIndex) -> f64 {
    let (counts, dists) = coarse_statistics(coarse, gt, gt_index);
    let mut free: Vec<f64> = counts.iter().zip(&dists).filter(|(&n, _)| n == 0).map(|(_, &d)| d).collect();
    if free.is_empty() {
        return 1.0;
    }
    free.sort_by(f64::total_cmp);
    let rank = ((T_CALIBRATION_PERCENTILE * free.len() as f64).ceil() as usize).clamp(1, free.len());
    let d = free[rank - 1];
    if d > 0.0 {
        TARGET_AT_PERCENTILE / d
    } else {
        1.0
    }
}

/// Mean absolute difference between predicted scores and targets.
pub fn score_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::ShapeMismatch { left: predicted.len(), right: target.len() });
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = predicted.iter().zip(target).map(|(z, g)| (z - g).abs()).sum();
    Ok(total / predicted.len() as f64)
}

/// `1 / (1 + exp(beta * z + gamma))`, evaluated without overflow.
pub fn existence_prob(z: f64, beta: f64, gamma: f64) -> f64 {
    let a = beta * z + gamma;
    if a > 0.0 {
        let e = (-a).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + a.exp())
    }
}

/// Produces per-point importance scores `z`.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, cloud: &PointCloud, gt: Option<&PointCloud>) -> Result<Vec<f64>>;
}

/// Scores with the exact target `g(x)`; needs the ground truth.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer {
    pub t: Option<f64>,
}

impl Scorer for OracleScorer {
    fn name(&self) -> &str {
        "oracle"
    }

    fn score(&self, cloud: &PointCloud, gt: Option<&PointCloud>) -> Result<Vec<f64>> {
        let gt = gt.ok_or_else(|| Error::InvalidParam("oracle scorer needs a ground truth".into()))?;
        let gt_index = NeighborIndex::new(gt);
        let t = self.t.unwrap_or_else(|| calibrate_t(cloud, gt, &gt_index));
        g_target(cloud, gt, &gt_index, t)
    }
}

/// Same score for every point (ablation baseline).
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantScorer {
    pub value: f64,
}

impl Scorer for ConstantScorer {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, cloud: &PointCloud, _gt: Option<&PointCloud>) -> Result<Vec<f64>> {
        Ok(vec![self.value; cloud.len()])
    }
}

pub const SCORER_NAMES: [&str; 2] = ["oracle", "constant"];

pub fn scorer_by_name(name: &str, params: &SamplerParams) -> Option<Box<dyn Scorer>> {
    match name {
        "oracle" => Some(Box::new(OracleScorer { t: params.t })),
        "constant" => Some(Box::new(ConstantScorer { value: 0.0 })),
        _ => None,
    }
}

/// `s` jittered replicas per point, point-major (replica `k` belongs to point `k / s`).
pub fn upsample_jitter(cloud: &PointCloud, s: usize, seed: u64) -> Result<PointCloud> {
    if s == 0 {
        return Err(Error::InvalidParam("upscale must be >= 1".into()));
    }
    let sigma = JITTER_SPACING_FRACTION * mean_nn_spacing(cloud);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let mut rng = rng::stream(seed, &[0x7570]);
    let mut pts = Vec::with_capacity(cloud.len() * s);
    for p in cloud.points() {
        for _ in 0..s {
            let j = Point3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
            pts.push(*p + j);
        }
    }
    PointCloud::new(pts)
}

/// Everything the guided pipeline decided, for inspection.
#[derive(Debug, Clone)]
pub struct GuidedOutcome {
    pub cloud: PointCloud,
    /// Existence probability of each coarse point.
    pub probabilities: Vec<f64>,
    /// Up-sampled coarse cloud (replica `k` belongs to coarse point `k / upscale`).
    pub upsampled: PointCloud,
    /// Replicas that survived Bernoulli thinning.
    pub survivors: Vec<usize>,
    /// Replicas added back by the top-probability refill.
    pub refilled: Vec<usize>,
}

/// Guided down-sampling to exactly `m` points.
pub fn guided_downsample(
    coarse: &ScoredCloud,
    rec: &PointCloud,
    params: &SamplerParams,
    m: usize,
    seed: u64,
) -> Result<PointCloud> {
    guided_downsample_detailed(coarse, rec, params, m, seed).map(|o| o.cloud)
}

pub fn guided_downsample_detailed(
    coarse: &ScoredCloud,
    rec: &PointCloud,
    params: &SamplerParams,
    m: usize,
    seed: u64,
) -> Result<GuidedOutcome> {
    params.validate()?;
    if m == 0 {
        return Err(Error::InvalidCount { count: 0, expected: ">= 1".into() });
    }
    let s = params.upscale;
    let probabilities: Vec<f64> =
        coarse.scores().iter().map(|&z| existence_prob(z, params.beta, params.gamma)).collect();
    let upsampled = upsample_jitter(coarse.cloud(), s, seed)?;
    let thin_seed = rng::derive_seed(seed, &[0x7468_696e]);
    let (survivors, dropped): (Vec<usize>, Vec<usize>) = (0..upsampled.len())
        .partition(|&k| rng::counter_uniform(thin_seed, k as u64) < probabilities[k / s]);

    let mut refilled = Vec::new();
    let available = survivors.len() + rec.len();
    if available < m {
        let mut order = dropped;
        order.sort_by(|&a, &b| probabilities[b / s].total_cmp(&probabilities[a / s]).then(a.cmp(&b)));
        refilled = order.into_iter().take(m - available).collect();
        if available + refilled.len() < m {
            return Err(Error::InsufficientPoints { needed: m, available: available + refilled.len() });
        }
    }
    let mut ids = survivors.clone();
    ids.extend_from_slice(&refilled);
    ids.sort_unstable();
    let mut pts: Vec<Point3> = ids.iter().map(|&k| upsampled.get(k)).collect();
    pts.extend_from_slice(rec.points());
    let union = PointCloud::new(pts)?;
    let cloud = fps(&union, m, 0)?;
    Ok(GuidedOutcome { cloud, probabilities, upsampled, survivors, refilled })
}

/// Unguided baseline: FPS over the up-sampled coarse cloud and the reconstruction.
pub fn plain_downsample(coarse: &PointCloud, rec: &PointCloud, upscale: usize, m: usize, seed: u64) -> Result<PointCloud> {
    let up = upsample_jitter(coarse, upscale, seed)?;
    let union = up.concat(rec);
    if union.len() < m {
        return Err(Error::InsufficientPoints { needed: m, available: union.len() });
    }
    fps(&union, m, 0)
}

/// Benchmark instance: a coarse cloud with planted off-surface outliers and a
/// clean partial reconstruction, both drawn from the same synthetic shape.
#[derive(Debug, Clone)]
pub struct PlantedOutliers {
    pub gt: PointCloud,
    pub coarse: PointCloud,
    pub rec: PointCloud,
    /// Indices into `coarse` of the planted outliers.
    pub outliers: Vec<usize>,
}

pub const PLANTED_GT_SIZE: usize = 2048;
pub const PLANTED_COARSE_SIZE: usize = 512;
pub const PLANTED_REC_SIZE: usize = 1536;
pub const PLANTED_OUTLIER_FRACTION: f64 = 0.05;
/// Outlier displacement length, drawn uniformly in this range.
pub const PLANTED_OFFSET: (f64, f64) = (0.2, 0.4);
/// Minimum distance between a planted outlier and the dense shape.
pub const PLANTED_CLEARANCE: f64 = 0.15;

pub fn planted_outlier_instance(seed: u64) -> Result<PlantedOutliers> {
    let kind = ShapeKind::ALL[(seed % ShapeKind::ALL.len() as u64) as usize];
    let (dense, _) = synth_shapes(kind, 4 * PLANTED_GT_SIZE, seed)?;
    let gt = fps(&dense, PLANTED_GT_SIZE, 0)?;
    let mut rng = rng::stream(seed, &[0x706c_616e]);

    let picks = sample(&mut rng, dense.len(), PLANTED_COARSE_SIZE).into_vec();
    let mut coarse: Vec<Point3> = picks.iter().map(|&i| dense.get(i)).collect();
    let n_out = (PLANTED_OUTLIER_FRACTION * PLANTED_COARSE_SIZE as f64).ceil() as usize;
    let mut outliers = sample(&mut rng, PLANTED_COARSE_SIZE, n_out).into_vec();
    outliers.sort_unstable();
    let dense_index = NeighborIndex::new(&dense);
    for &i in &outliers {
        loop {
            let [x, y, z]: [f64; 3] = UnitSphere.sample(&mut rng);
            let r = rng.random_range(PLANTED_OFFSET.0..PLANTED_OFFSET.1);
            let q = coarse[i] + Point3::new(x, y, z) * r;
            if dense_index.nearest_one(&q).1 >= PLANTED_CLEARANCE * PLANTED_CLEARANCE {
                coarse[i] = q;
                break;
            }
        }
    }

    let [x, y, z]: [f64; 3] = UnitSphere.sample(&mut rng);
    let side = half_space_cut(&dense, Point3::new(x, y, z), dense.len() / 2);
    let keep = sample(&mut rng, side.len(), PLANTED_REC_SIZE).into_vec();
    let rec: Vec<Point3> = keep.iter().map(|&k| dense.get(side[k])).collect();

    Ok(PlantedOutliers { gt, coarse: PointCloud::new(coarse)?, rec: PointCloud::new(rec)?, outliers })
}
