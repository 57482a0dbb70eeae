//! Farthest point sampling.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Indices of a greedy farthest-point subsample of size `m` starting at
/// `seed_id`. Each step picks the point maximizing the distance to the
/// already-selected set; ties go to the lower index.
pub fn fps_indices(cloud: &PointCloud, m: usize, seed_id: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::InvalidCount { count: m, expected: format!("1..={n}") });
    }
    if seed_id >= n {
        return Err(Error::InvalidCount { count: seed_id, expected: format!("seed id < {n}") });
    }
    let pts = cloud.points();
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut picked = Vec::with_capacity(m);
    let mut current = seed_id;
    for _ in 1..m {
        picked.push(current);
        let c = pts[current];
        min_d2[current] = f64::NEG_INFINITY;
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, (p, md)) in pts.iter().zip(min_d2.iter_mut()).enumerate() {
            let d2 = c.dist2(p);
            if d2 < *md {
                *md = d2;
            }
            if *md > best_d2 {
                best_d2 = *md;
                best = i;
            }
        }
        current = best;
    }
    picked.push(current);
    Ok(picked)
}

pub fn fps(cloud: &PointCloud, m: usize, seed_id: usize) -> Result<PointCloud> {
    cloud.select(&fps_indices(cloud, m, seed_id)?)
}
