//! Seeded synthetic degradations and test shapes.
//!
//! Everything here is a pure function of its inputs and seed.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::index::NeighborIndex;
use crate::rng;
use crate::sampling::{fps, fps_indices};

/// Recipe for one degraded cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationSpec {
    pub seed: u64,
    /// Standard deviation of the isotropic noise on the complete component.
    pub noise_sigma: f64,
    /// Points in the complete, noisy component.
    pub imbalance_n: usize,
    /// Fraction of the ground truth kept by the half-space cut.
    pub partial_keep_fraction: f64,
    pub outlier_fraction: f64,
    pub outlier_radius: f64,
    pub curvature_ratio: f64,
    pub target_size: usize,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_sigma: 0.0,
            imbalance_n: 2048,
            partial_keep_fraction: 0.5,
            outlier_fraction: 0.0,
            outlier_radius: 1.0,
            curvature_ratio: 0.0,
            target_size: 2048,
        }
    }
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if self.imbalance_n == 0 {
            return bad("imbalance_n must be >= 1".into());
        }
        if !(self.partial_keep_fraction > 0.0 && self.partial_keep_fraction <= 1.0) {
            return bad(format!("partial_keep_fraction must be in (0,1], got {}", self.partial_keep_fraction));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad(format!("outlier_fraction must be in [0,1), got {}", self.outlier_fraction));
        }
        if !self.outlier_radius.is_finite() || self.outlier_radius < 0.0 {
            return bad(format!("outlier_radius must be >= 0, got {}", self.outlier_radius));
        }
        if !(0.0..=1.0).contains(&self.curvature_ratio) {
            return bad(format!("curvature_ratio must be in [0,1], got {}", self.curvature_ratio));
        }
        if self.target_size == 0 {
            return bad("target_size must be >= 1".into());
        }
        Ok(())
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Point3 {
    loop {
        let v = Point3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v * (1.0 / n);
        }
    }
}

/// Half-space cut: the `keep` points with the lowest projection on `dir`
/// (relative to the centroid), ties by index.
pub fn half_space_cut(cloud: &PointCloud, dir: Point3, keep: usize) -> Vec<usize> {
    let c = cloud.centroid();
    let proj = |p: &Point3| {
        let d = *p - c;
        d.x * dir.x + d.y * dir.y + d.z * dir.z
    };
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| proj(&cloud.get(a)).total_cmp(&proj(&cloud.get(b))).then(a.cmp(&b)));
    order.truncate(keep);
    order
}

/// Complete-but-noisy plus partial-but-clean mixture, FPS'd back to
/// `target_size` points.
///
/// `gt` is a dense ground-truth sample. The noisy component draws
/// `imbalance_n` points from it (with replacement only when it has fewer);
/// the clean component is `target_size` points from one side of a seeded
/// half-space cut through the centroid.
pub fn mix_noise_imbalance(gt: &PointCloud, spec: &DegradationSpec) -> Result<PointCloud> {
    spec.validate()?;
    if gt.len() < spec.target_size {
        return Err(Error::InsufficientPoints { needed: spec.target_size, available: gt.len() });
    }
    let mut rng = rng::stream(spec.seed, &[0x6d_6978]);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;

    let picks: Vec<usize> = if spec.imbalance_n <= gt.len() {
        index::sample(&mut rng, gt.len(), spec.imbalance_n).into_vec()
    } else {
        (0..spec.imbalance_n).map(|_| rng.random_range(0..gt.len())).collect()
    };
    let mut pts: Vec<Point3> = picks
        .iter()
        .map(|&i| {
            let p = gt.get(i);
            Point3::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng), p.z + noise.sample(&mut rng))
        })
        .collect();

    let dir = random_unit(&mut rng);
    let keep = ((spec.partial_keep_fraction * gt.len() as f64).ceil() as usize).min(gt.len());
    let region = half_space_cut(gt, dir, keep);
    if region.len() < spec.target_size {
        return Err(Error::InsufficientPoints { needed: spec.target_size, available: region.len() });
    }
    let mut chosen: Vec<usize> = index::sample(&mut rng, region.len(), spec.target_size)
        .into_iter()
        .map(|k| region[k])
        .collect();
    chosen.sort_unstable();
    pts.extend(chosen.iter().map(|&i| gt.get(i)));

    let union = PointCloud::new(pts)?;
    fps(&union, spec.target_size, 0)
}

/// Replaces `floor(fraction * n)` random points by points on a shell of
/// radius about `radius` around the centroid.
pub fn inject_outliers(cloud: &PointCloud, fraction: f64, radius: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParam(format!("outlier fraction must be in [0,1), got {fraction}")));
    }
    let count = (fraction * cloud.len() as f64).floor() as usize;
    if count == 0 {
        return Ok(cloud.clone());
    }
    let mut rng = rng::stream(seed, &[0x6f_7574]);
    let c = cloud.centroid();
    let mut pts = cloud.points().to_vec();
    let mut victims = index::sample(&mut rng, cloud.len(), count).into_vec();
    victims.sort_unstable();
    for i in victims {
        let r = radius * rng.random_range(0.95..1.05);
        pts[i] = c + random_unit(&mut rng) * r;
    }
    PointCloud::new(pts)
}

/// Mixture of curvature-weighted and blue-noise sampling.
///
/// `m - floor(r_c * m)` points come from FPS over `gt_dense`; the remaining
/// `floor(r_c * m)` are drawn without replacement from the other points with
/// probability proportional to curvature (weighted reservoir keys).
pub fn curvature_mix_sample(
    gt_dense: &PointCloud,
    curvatures: &[f64],
    r_c: f64,
    m: usize,
    seed: u64,
) -> Result<PointCloud> {
    if curvatures.len() != gt_dense.len() {
        return Err(Error::ShapeMismatch { left: gt_dense.len(), right: curvatures.len() });
    }
    if !(0.0..=1.0).contains(&r_c) {
        return Err(Error::InvalidParam(format!("R_c must be in [0,1], got {r_c}")));
    }
    if let Some(i) = curvatures.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParam(format!("curvature {i} must be finite and >= 0")));
    }
    if m == 0 || m > gt_dense.len() {
        return Err(Error::InvalidCount { count: m, expected: format!("1..={}", gt_dense.len()) });
    }
    let curved = (r_c * m as f64).floor() as usize;
    let mut ids = if curved < m { fps_indices(gt_dense, m - curved, 0)? } else { Vec::new() };
    if curved > 0 {
        let mut taken = vec![false; gt_dense.len()];
        for &i in &ids {
            taken[i] = true;
        }
        ids.extend(weighted_draw(curvatures, &taken, curved, seed));
    }
    gt_dense.select(&ids)
}

/// `k` indices drawn without replacement with probability proportional to
/// `weights` (Efraimidis-Spirakis keys `u^(1/w)`); all-zero weights fall
/// back to uniform.
fn weighted_draw(weights: &[f64], excluded: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let uniform = weights.iter().all(|&w| w == 0.0);
    let mut keyed: Vec<(f64, usize)> = (0..weights.len())
        .filter(|&i| !excluded[i])
        .map(|i| {
            let u = rng::counter_uniform(seed, i as u64).max(f64::MIN_POSITIVE);
            let w = if uniform { 1.0 } else { weights[i] };
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(k).map(|(_, i)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere,
    Torus,
    Box,
    Lshape,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [ShapeKind::Sphere, ShapeKind::Torus, ShapeKind::Box, ShapeKind::Lshape];
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(ShapeKind::Sphere),
            "torus" => Ok(ShapeKind::Torus),
            "box" => Ok(ShapeKind::Box),
            "lshape" => Ok(ShapeKind::Lshape),
            other => Err(Error::InvalidParam(format!("unknown shape {other:?}"))),
        }
    }
}

pub const SPHERE_RADIUS: f64 = 0.5;
pub const TORUS_MAJOR: f64 = 0.35;
pub const TORUS_MINOR: f64 = 0.15;
pub const BOX_HALF: [f64; 3] = [0.4, 0.3, 0.2];
/// Unit size of the L footprint (three `L x L` squares) and its extrusion height.
pub const LSHAPE_UNIT: f64 = 0.3;
pub const LSHAPE_HEIGHT: f64 = 0.2;
const EDGE_SOFTENING: f64 = 0.02;

/// Area-uniform surface samples of a synthetic shape, with a per-point
/// curvature proxy (analytic principal-curvature magnitude for the smooth
/// shapes, `1 / (0.02 + distance to nearest edge)` for the polyhedral ones).
pub fn synth_shapes(kind: ShapeKind, n: usize, seed: u64) -> Result<(PointCloud, Vec<f64>)> {
    if n < 64 {
        return Err(Error::InvalidCount { count: n, expected: ">= 64".into() });
    }
    let mut rng = rng::stream(seed, &[0x7368_6170, kind as u64]);
    let mut pts = Vec::with_capacity(n);
    let mut curv = Vec::with_capacity(n);
    match kind {
        ShapeKind::Sphere => {
            for _ in 0..n {
                pts.push(random_unit(&mut rng) * SPHERE_RADIUS);
                curv.push(2.0 / SPHERE_RADIUS);
            }
        }
        ShapeKind::Torus => {
            let (big, small) = (TORUS_MAJOR, TORUS_MINOR);
            while pts.len() < n {
                let u = rng.random_range(0.0..std::f64::consts::TAU);
                let v = rng.random_range(0.0..std::f64::consts::TAU);
                let ring = big + small * v.cos();
                if rng.random::<f64>() * (big + small) > ring {
                    continue;
                }
                pts.push(Point3::new(ring * u.cos(), ring * u.sin(), small * v.sin()));
                curv.push(1.0 / small + v.cos().abs() / ring);
            }
        }
        ShapeKind::Box => {
            let h = BOX_HALF;
            // faces perpendicular to axis a, one per sign
            let areas: Vec<f64> = (0..3).map(|a| 4.0 * h[(a + 1) % 3] * h[(a + 2) % 3]).collect();
            let total: f64 = areas.iter().sum::<f64>() * 2.0;
            for _ in 0..n {
                let mut t = rng.random::<f64>() * total;
                let mut axis = 0;
                while axis < 2 && t >= 2.0 * areas[axis] {
                    t -= 2.0 * areas[axis];
                    axis += 1;
                }
                let sign = if t < areas[axis] { -1.0 } else { 1.0 };
                let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                let s1 = rng.random_range(-h[a1]..h[a1]);
                let s2 = rng.random_range(-h[a2]..h[a2]);
                let mut p = Point3::ORIGIN;
                *p.coord_mut(axis) = sign * h[axis];
                *p.coord_mut(a1) = s1;
                *p.coord_mut(a2) = s2;
                let edge = (h[a1] - s1.abs()).min(h[a2] - s2.abs());
                pts.push(p);
                curv.push(1.0 / (EDGE_SOFTENING + edge));
            }
        }
        ShapeKind::Lshape => lshape_samples(&mut rng, n, &mut pts, &mut curv),
    }
    let cloud = PointCloud::new(pts)?;
    Ok((cloud, curv))
}

fn lshape_samples(rng: &mut ChaCha8Rng, n: usize, pts: &mut Vec<Point3>, curv: &mut Vec<f64>) {
    let l = LSHAPE_UNIT;
    let hz = LSHAPE_HEIGHT;
    // footprint polygon, counter-clockwise, centered afterwards
    let poly = [(0.0, 0.0), (2.0 * l, 0.0), (2.0 * l, l), (l, l), (l, 2.0 * l), (0.0, 2.0 * l)];
    let (cx, cy) = (5.0 * l / 6.0, 5.0 * l / 6.0);
    let seg_dist = |x: f64, y: f64| -> f64 {
        (0..poly.len())
            .map(|k| {
                let (ax, ay) = poly[k];
                let (bx, by) = poly[(k + 1) % poly.len()];
                let (dx, dy) = (bx - ax, by - ay);
                let t = (((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                ((x - ax - t * dx).powi(2) + (y - ay - t * dy).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let cap_area = 3.0 * l * l;
    let perimeter = 8.0 * l;
    let side_area = perimeter * hz;
    let total = 2.0 * cap_area + side_area;
    for _ in 0..n {
        let t = rng.random::<f64>() * total;
        if t < 2.0 * cap_area {
            let z = if t < cap_area { 0.0 } else { hz };
            let square = rng.random_range(0..3);
            let (ox, oy) = [(0.0, 0.0), (l, 0.0), (0.0, l)][square];
            let x = ox + rng.random::<f64>() * l;
            let y = oy + rng.random::<f64>() * l;
            pts.push(Point3::new(x - cx, y - cy, z - hz / 2.0));
            curv.push(1.0 / (EDGE_SOFTENING + seg_dist(x, y)));
        } else {
            // walk the perimeter
            let mut s = rng.random::<f64>() * perimeter;
            let z = rng.random::<f64>() * hz;
            let mut k = 0;
            loop {
                let (ax, ay) = poly[k];
                let (bx, by) = poly[(k + 1) % poly.len()];
                let len = ((bx - ax) * (bx - ax) + (by - ay) * (by - ay)).sqrt();
                if s <= len || k == poly.len() - 1 {
                    let f = (s / len).min(1.0);
                    let (x, y) = (ax + f * (bx - ax), ay + f * (by - ay));
                    pts.push(Point3::new(x - cx, y - cy, z - hz / 2.0));
                    let edge = (s.min(len - s)).min(z.min(hz - z));
                    curv.push(1.0 / (EDGE_SOFTENING + edge.max(0.0)));
                    break;
                }
                s -= len;
                k += 1;
            }
        }
    }
}

/// Mean distance from each point to its nearest other point.
pub fn mean_nn_spacing(cloud: &PointCloud) -> f64 {
    if cloud.len() < 2 {
        return 0.0;
    }
    let index = NeighborIndex::new(cloud);
    let total: f64 = cloud.points().iter().map(|p| index.nearest(p, 2)[1].dist()).sum();
    total / cloud.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_has_constant_curvature_and_radius() {
        let (c, k) = synth_shapes(ShapeKind::Sphere, 500, 1).unwrap();
        assert!(k.iter().all(|&v| v == k[0]));
        assert!(c.points().iter().all(|p| (p.norm() - SPHERE_RADIUS).abs() < 1e-12));
    }

    #[test]
    fn torus_extents_and_distinct_points() {
        let (c, _) = synth_shapes(ShapeKind::Torus, 2048, 9).unwrap();
        let (lo, hi) = c.bounds();
        let outer = TORUS_MAJOR + TORUS_MINOR;
        for (v, lim) in [(lo.x, -outer), (lo.y, -outer), (lo.z, -TORUS_MINOR), (hi.x, outer), (hi.y, outer), (hi.z, TORUS_MINOR)] {
            assert!((v - lim).abs() < 0.02, "{v} vs {lim}");
            assert!(v.abs() <= lim.abs() + 1e-12);
        }
        let index = NeighborIndex::new(&c);
        let min_gap = c.points().iter().map(|p| index.nearest(p, 2)[1].dist2).fold(f64::INFINITY, f64::min);
        assert!(min_gap > 0.0);
    }

    #[test]
    fn shapes_are_deterministic() {
        for kind in ShapeKind::ALL {
            let a = synth_shapes(kind, 256, 4).unwrap();
            let b = synth_shapes(kind, 256, 4).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.0, synth_shapes(kind, 256, 5).unwrap().0);
            assert!(a.1.iter().all(|v| v.is_finite() && *v > 0.0));
        }
        assert!(synth_shapes(ShapeKind::Sphere, 63, 0).is_err());
    }

    #[test]
    fn mixture_has_target_size_and_is_deterministic() {
        let (gt, _) = synth_shapes(ShapeKind::Torus, 4096, 2).unwrap();
        let spec = DegradationSpec { seed: 3, noise_sigma: 0.01, imbalance_n: 700, target_size: 512, ..Default::default() };
        let a = mix_noise_imbalance(&gt, &spec).unwrap();
        assert_eq!(a.len(), 512);
        assert_eq!(a, mix_noise_imbalance(&gt, &spec).unwrap());
        let big = DegradationSpec { imbalance_n: 9000, ..spec.clone() };
        assert_eq!(mix_noise_imbalance(&gt, &big).unwrap().len(), 512);
        let small_gt = gt.select(&(0..100).collect::<Vec<_>>()).unwrap();
        assert!(matches!(mix_noise_imbalance(&small_gt, &spec), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn outliers() {
        let (c, _) = synth_shapes(ShapeKind::Sphere, 200, 0).unwrap();
        assert_eq!(inject_outliers(&c, 0.0, 10.0, 1).unwrap(), c);
        let o = inject_outliers(&c, 0.1, 10.0, 1).unwrap();
        let centroid = c.centroid();
        let far = o.points().iter().filter(|p| (**p - centroid).norm() > 9.0).count();
        assert_eq!(far, 20);
        assert!(inject_outliers(&c, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn curvature_mix() {
        let (c, k) = synth_shapes(ShapeKind::Box, 2000, 0).unwrap();
        let pure = curvature_mix_sample(&c, &k, 0.0, 300, 1).unwrap();
        assert_eq!(pure, fps(&c, 300, 0).unwrap());
        let mixed = curvature_mix_sample(&c, &k, 0.5, 300, 1).unwrap();
        assert_eq!(mixed.len(), 300);
        assert_eq!(mixed, curvature_mix_sample(&c, &k, 0.5, 300, 1).unwrap());
        assert!(matches!(curvature_mix_sample(&c, &k[1..], 0.5, 300, 1), Err(Error::ShapeMismatch { .. })));
        // curvature-weighted picks concentrate near edges
        let mean_k = |cl: &PointCloud| {
            let idx = NeighborIndex::new(&c);
            cl.points().iter().map(|p| k[idx.nearest_one(p).0]).sum::<f64>() / cl.len() as f64
        };
        assert!(mean_k(&curvature_mix_sample(&c, &k, 1.0, 300, 1).unwrap()) > mean_k(&pure));
    }

    #[test]
    fn equal_weights_draw_uniformly() {
        let w = vec![2.5; 1000];
        let none = vec![false; 1000];
        let a = weighted_draw(&w, &none, 100, 7);
        assert_eq!(a, weighted_draw(&vec![0.0; 1000], &none, 100, 7));
        let low = a.iter().filter(|&&i| i < 500).count();
        assert!((30..=70).contains(&low));
    }

    #[test]
    fn spec_json_round_trip_uses_snake_case() {
        let spec = DegradationSpec { seed: 9, noise_sigma: 0.5, ..Default::default() };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"partial_keep_fraction\""));
        assert!(json.contains("\"imbalance_n\""));
        let back: DegradationSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let partial: DegradationSpec = serde_json::from_str("{\"seed\": 4}").unwrap();
        assert_eq!(partial.target_size, 2048);
    }
}
