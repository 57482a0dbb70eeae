//! Chamfer, Hausdorff and density-aware Chamfer distances.
//!
//! Every measure is built from two directed nearest-neighbour passes. A
//! [`MetricReport`] keeps the per-point share of the total so the value can be
//! reconstructed (and ranked, plotted, accumulated) point by point.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::NeighborIndex;

/// Which distance enters the exponential of the density-aware term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMode {
    /// `exp(-alpha * |x - y|)`
    Euclidean,
    /// `exp(-alpha * |x - y|^2)`
    #[default]
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcdParams {
    /// Temperature, > 0.
    pub alpha: f64,
    /// Frequency exponent in `[0, 1]`; the query count `n` enters as `n^lambda`.
    pub lambda: f64,
    pub exponent_mode: ExponentMode,
}

impl Default for DcdParams {
    fn default() -> Self {
        Self::evaluation()
    }
}

impl DcdParams {
    /// Evaluation setting: `alpha = 1000`, plain `1/n`, squared distances.
    pub const fn evaluation() -> Self {
        Self { alpha: 1000.0, lambda: 1.0, exponent_mode: ExponentMode::Squared }
    }

    /// Loss setting; `alpha` is typically in `[40, 100]`.
    pub const fn training(alpha: f64, lambda: f64) -> Self {
        Self { alpha, lambda, exponent_mode: ExponentMode::Squared }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_mode(mut self, mode: ExponentMode) -> Self {
        self.exponent_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParam(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParam(format!("lambda must be in [0,1], got {}", self.lambda)));
        }
        Ok(())
    }

    /// `exp(-alpha * d)` or `exp(-alpha * d^2)` from a squared distance.
    #[inline]
    pub fn decay(&self, dist2: f64) -> f64 {
        let d = match self.exponent_mode {
            ExponentMode::Squared => dist2,
            ExponentMode::Euclidean => dist2.sqrt(),
        };
        (-self.alpha * d).exp()
    }

    /// `n^(-lambda)`.
    #[inline]
    pub fn frequency_weight(&self, n: u32) -> f64 {
        frequency_weight(n, self.lambda)
    }
}

#[inline]
pub(crate) fn frequency_weight(n: u32, lambda: f64) -> f64 {
    if lambda == 1.0 {
        1.0 / n as f64
    } else {
        (n as f64).powf(-lambda)
    }
}

/// Per-point query counts over the target of a directed pass.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryFrequency {
    pub counts: Vec<u32>,
}

impl QueryFrequency {
    pub fn from_assignment(assign: &[(usize, f64)], target_len: usize) -> Self {
        let mut counts = vec![0u32; target_len];
        for &(id, _) in assign {
            counts[id] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChamferVariant {
    /// Squared distances (training-style CD).
    T,
    /// Plain Euclidean distances.
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnequalVariant {
    /// Scales the frequency weights by the size ratio; terms may go negative.
    Naive,
    /// Capped weights plus k-nearest averaging; bounded in `[0, 1]`.
    E,
}

/// A distance value with its per-point breakdown.
///
/// `per_point_src[i]` is the share of `value` contributed by point `i` of the
/// first cloud and `per_point_tgt[j]` that of point `j` of the second, so
/// `value == sum(per_point_src) + sum(per_point_tgt)`. `forward` counts how
/// often each point of the second cloud was queried from the first;
/// `backward` the reverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub value: f64,
    pub per_point_src: Vec<f64>,
    pub per_point_tgt: Vec<f64>,
    pub forward: QueryFrequency,
    pub backward: QueryFrequency,
    /// Set when the computation internally swapped the argument roles.
    pub swapped: bool,
}

impl MetricReport {
    fn assemble(
        per_point_src: Vec<f64>,
        per_point_tgt: Vec<f64>,
        forward: QueryFrequency,
        backward: QueryFrequency,
        swapped: bool,
    ) -> Self {
        let value = per_point_src.iter().sum::<f64>() + per_point_tgt.iter().sum::<f64>();
        Self { value, per_point_src, per_point_tgt, forward, backward, swapped }
    }

    /// Absorbs summation rounding for measures bounded in `[0, 1]`.
    fn clamp_unit(mut self) -> Self {
        self.value = self.value.clamp(0.0, 1.0);
        self
    }

    fn swap_roles(self) -> Self {
        Self {
            value: self.value,
            per_point_src: self.per_point_tgt,
            per_point_tgt: self.per_point_src,
            forward: self.backward,
            backward: self.forward,
            swapped: !self.swapped,
        }
    }
}

/// For every source point, its nearest target `(id, squared distance)`.
pub fn nearest_pass(src: &PointCloud, tgt: &NeighborIndex) -> Vec<(usize, f64)> {
    src.points().iter().map(|p| tgt.nearest_one(p)).collect()
}

pub fn query_frequencies(src: &PointCloud, tgt_index: &NeighborIndex) -> QueryFrequency {
    QueryFrequency::from_assignment(&nearest_pass(src, tgt_index), tgt_index.len())
}

/// Two clouds with both directed nearest-neighbour passes precomputed.
///
/// Several measures can be read off one `CloudPair` without repeating the
/// neighbour searches.
#[derive(Debug, Clone)]
pub struct CloudPair<'a> {
    pub s1: &'a PointCloud,
    pub s2: &'a PointCloud,
    /// Nearest point of `s2` for each point of `s1`.
    pub forward: Vec<(usize, f64)>,
    /// Nearest point of `s1` for each point of `s2`.
    pub backward: Vec<(usize, f64)>,
}

impl<'a> CloudPair<'a> {
    pub fn new(s1: &'a PointCloud, s2: &'a PointCloud) -> Self {
        let i1 = NeighborIndex::new(s1);
        let i2 = NeighborIndex::new(s2);
        Self::with_indexes(s1, &i1, s2, &i2)
    }

    pub fn with_indexes(
        s1: &'a PointCloud,
        index1: &NeighborIndex,
        s2: &'a PointCloud,
        index2: &NeighborIndex,
    ) -> Self {
        Self { s1, s2, forward: nearest_pass(s1, index2), backward: nearest_pass(s2, index1) }
    }

    pub fn forward_frequency(&self) -> QueryFrequency {
        QueryFrequency::from_assignment(&self.forward, self.s2.len())
    }

    pub fn backward_frequency(&self) -> QueryFrequency {
        QueryFrequency::from_assignment(&self.backward, self.s1.len())
    }

    pub fn chamfer(&self, variant: ChamferVariant) -> MetricReport {
        let term = |d2: f64| match variant {
            ChamferVariant::T => d2,
            ChamferVariant::P => d2.sqrt(),
        };
        let n1 = self.s1.len() as f64;
        let n2 = self.s2.len() as f64;
        let src = self.forward.iter().map(|&(_, d2)| term(d2) / n1).collect();
        let tgt = self.backward.iter().map(|&(_, d2)| term(d2) / n2).collect();
        MetricReport::assemble(src, tgt, self.forward_frequency(), self.backward_frequency(), false)
    }

    pub fn hausdorff(&self) -> f64 {
        let max_d2 = self
            .forward
            .iter()
            .chain(self.backward.iter())
            .fold(0.0f64, |m, &(_, d2)| m.max(d2));
        max_d2.sqrt()
    }

    /// Density-aware Chamfer distance. Requires equal cardinalities.
    pub fn dcd(&self, params: &DcdParams) -> Result<MetricReport> {
        params.validate()?;
        if self.s1.len() != self.s2.len() {
            return Err(Error::CardinalityMismatch { left: self.s1.len(), right: self.s2.len() });
        }
        let fwd = self.forward_frequency();
        let bwd = self.backward_frequency();
        let src = dcd_direction(&self.forward, &fwd, params);
        let tgt = dcd_direction(&self.backward, &bwd, params);
        Ok(MetricReport::assemble(src, tgt, fwd, bwd, false).clamp_unit())
    }
}

fn dcd_direction(assign: &[(usize, f64)], freq: &QueryFrequency, params: &DcdParams) -> Vec<f64> {
    let scale = 1.0 / (2.0 * assign.len() as f64);
    assign
        .iter()
        .map(|&(id, d2)| (1.0 - params.frequency_weight(freq.counts[id]) * params.decay(d2)) * scale)
        .collect()
}

pub fn chamfer(s1: &PointCloud, s2: &PointCloud, variant: ChamferVariant) -> MetricReport {
    CloudPair::new(s1, s2).chamfer(variant)
}

/// Symmetric Hausdorff distance (Euclidean).
pub fn hausdorff(s1: &PointCloud, s2: &PointCloud) -> f64 {
    CloudPair::new(s1, s2).hausdorff()
}

/// Density-aware Chamfer distance between equal-size clouds. Lies in `[0, 1]`.
pub fn dcd(s1: &PointCloud, s2: &PointCloud, params: &DcdParams) -> Result<MetricReport> {
    params.validate()?;
    if s1.len() != s2.len() {
        return Err(Error::CardinalityMismatch { left: s1.len(), right: s2.len() });
    }
    CloudPair::new(s1, s2).dcd(params)
}

/// Density-aware Chamfer distance for clouds of different sizes.
///
/// With `eta = |larger| / |smaller|` the larger cloud is expected to hit each
/// point of the smaller one about `eta` times. Arguments are swapped
/// internally when the first cloud is the smaller one; `swapped` records it
/// and the per-point vectors still follow the caller's argument order.
/// Equal sizes fall through to [`dcd`].
pub fn dcd_unequal(
    s1: &PointCloud,
    s2: &PointCloud,
    params: &DcdParams,
    variant: UnequalVariant,
) -> Result<MetricReport> {
    params.validate()?;
    if s1.len() == s2.len() {
        return dcd(s1, s2, params);
    }
    if s1.len() < s2.len() {
        return dcd_unequal_ordered(s2, s1, params, variant).map(MetricReport::swap_roles);
    }
    dcd_unequal_ordered(s1, s2, params, variant)
}

fn dcd_unequal_ordered(
    big: &PointCloud,
    small: &PointCloud,
    params: &DcdParams,
    variant: UnequalVariant,
) -> Result<MetricReport> {
    let eta = big.len() as f64 / small.len() as f64;
    let small_index = NeighborIndex::new(small);
    let big_index = NeighborIndex::new(big);
    let forward = nearest_pass(big, &small_index);
    let fwd = QueryFrequency::from_assignment(&forward, small.len());
    let big_scale = 1.0 / (2.0 * big.len() as f64);
    let small_scale = 1.0 / (2.0 * small.len() as f64);

    match variant {
        UnequalVariant::Naive => {
            let src = forward
                .iter()
                .map(|&(id, d2)| {
                    let w = eta * params.frequency_weight(fwd.counts[id]);
                    (1.0 - w * params.decay(d2)) * big_scale
                })
                .collect();
            let backward = nearest_pass(small, &big_index);
            let bwd = QueryFrequency::from_assignment(&backward, big.len());
            let tgt = backward
                .iter()
                .map(|&(id, d2)| {
                    let w = params.frequency_weight(bwd.counts[id]) / eta;
                    (1.0 - w * params.decay(d2)) * small_scale
                })
                .collect();
            Ok(MetricReport::assemble(src, tgt, fwd, bwd, false))
        }
        UnequalVariant::E => {
            let src = forward
                .iter()
                .map(|&(id, d2)| {
                    // The frequency discount only starts once y is hit more than eta times.
                    let load = 1.0 / params.frequency_weight(fwd.counts[id]) / eta;
                    let w = 1.0 / load.max(1.0);
                    (1.0 - w * params.decay(d2)) * big_scale
                })
                .collect();
            let k = eta.ceil() as usize;
            let neighborhoods: Vec<_> =
                small.points().iter().map(|p| big_index.nearest(p, k)).collect();
            let mut counts = vec![0u32; big.len()];
            for hood in &neighborhoods {
                for nb in hood {
                    counts[nb.id] += 1;
                }
            }
            let bwd = QueryFrequency { counts };
            let inv_k = 1.0 / k as f64;
            let tgt = neighborhoods
                .iter()
                .map(|hood| {
                    let kept: f64 = hood
                        .iter()
                        .map(|nb| params.frequency_weight(bwd.counts[nb.id]) * params.decay(nb.dist2))
                        .sum();
                    (1.0 - inv_k * kept) * small_scale
                })
                .collect();
            Ok(MetricReport::assemble(src, tgt, fwd, bwd, false).clamp_unit())
        }
    }
}
