//! Deliberately naive O(n²) (and O(n!)) reference implementations.
//!
//! Nothing here shares code with `pointsim`: clouds are plain coordinate
//! arrays, every nearest-neighbour query is a full scan, and ties go to the
//! lower index.

use itertools::Itertools;

pub type P = [f64; 3];

pub fn d2(a: &P, b: &P) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// All target ids ordered by (squared distance, id).
pub fn ranked(q: &P, tgt: &[P]) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = tgt.iter().enumerate().map(|(j, t)| (j, d2(q, t))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}

pub fn nn(q: &P, tgt: &[P]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, t) in tgt.iter().enumerate() {
        let d = d2(q, t);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn knn(q: &P, tgt: &[P], k: usize) -> Vec<(usize, f64)> {
    let mut r = ranked(q, tgt);
    r.truncate(k);
    r
}

pub fn counts(src: &[P], tgt: &[P]) -> Vec<u32> {
    let mut c = vec![0; tgt.len()];
    for q in src {
        c[nn(q, tgt).0] += 1;
    }
    c
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

pub fn chamfer_t(a: &[P], b: &[P]) -> f64 {
    mean(a.iter().map(|p| nn(p, b).1), a.len()) + mean(b.iter().map(|p| nn(p, a).1), b.len())
}

pub fn chamfer_p(a: &[P], b: &[P]) -> f64 {
    mean(a.iter().map(|p| nn(p, b).1.sqrt()), a.len()) + mean(b.iter().map(|p| nn(p, a).1.sqrt()), b.len())
}

pub fn hausdorff(a: &[P], b: &[P]) -> f64 {
    let one = |x: &[P], y: &[P]| x.iter().map(|p| nn(p, y).1).fold(0.0, f64::max);
    one(a, b).max(one(b, a)).sqrt()
}

fn decay(d2: f64, alpha: f64, squared: bool) -> f64 {
    (-alpha * if squared { d2 } else { d2.sqrt() }).exp()
}

/// Equal-size density-aware Chamfer distance.
pub fn dcd(a: &[P], b: &[P], alpha: f64, lambda: f64, squared: bool) -> f64 {
    let dir = |x: &[P], y: &[P]| {
        let c = counts(x, y);
        mean(
            x.iter().map(|p| {
                let (j, d) = nn(p, y);
                1.0 - (c[j] as f64).powf(-lambda) * decay(d, alpha, squared)
            }),
            x.len(),
        )
    };
    0.5 * (dir(a, b) + dir(b, a))
}

/// Unequal-size variant with capped forward weights and k-nearest backward averaging.
pub fn dcd_e(a: &[P], b: &[P], alpha: f64, lambda: f64, squared: bool) -> f64 {
    let (big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if big.len() == small.len() {
        return dcd(a, b, alpha, lambda, squared);
    }
    let eta = big.len() as f64 / small.len() as f64;
    let k = eta.ceil() as usize;
    let c = counts(big, small);
    let fwd = mean(
        big.iter().map(|p| {
            let (j, d) = nn(p, small);
            let w = 1.0 / ((c[j] as f64).powf(lambda) / eta).max(1.0);
            1.0 - w * decay(d, alpha, squared)
        }),
        big.len(),
    );
    let hoods: Vec<Vec<(usize, f64)>> = small.iter().map(|q| knn(q, big, k)).collect();
    let mut bc = vec![0u32; big.len()];
    for h in &hoods {
        for &(j, _) in h {
            bc[j] += 1;
        }
    }
    let bwd = mean(
        hoods.iter().map(|h| {
            let s: f64 = h.iter().map(|&(j, d)| (bc[j] as f64).powf(-lambda) * decay(d, alpha, squared)).sum();
            1.0 - s / k as f64
        }),
        small.len(),
    );
    0.5 * (fwd + bwd)
}

/// Unequal-size variant with plain ratio weights (can be negative).
pub fn dcd_naive(a: &[P], b: &[P], alpha: f64, lambda: f64, squared: bool) -> f64 {
    let (big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let eta = big.len() as f64 / small.len() as f64;
    let dir = |x: &[P], y: &[P], scale: f64| {
        let c = counts(x, y);
        mean(
            x.iter().map(|p| {
                let (j, d) = nn(p, y);
                1.0 - scale * (c[j] as f64).powf(-lambda) * decay(d, alpha, squared)
            }),
            x.len(),
        )
    };
    0.5 * (dir(big, small, eta) + dir(small, big, 1.0 / eta))
}

/// Minimum-cost bijection by trying every permutation.
pub fn emd_enumerate(a: &[P], b: &[P]) -> f64 {
    assert_eq!(a.len(), b.len());
    (0..b.len())
        .permutations(b.len())
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| d2(&a[i], &b[j]).sqrt()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Farthest point sampling by full rescans; never repeats a point.
pub fn fps(pts: &[P], m: usize, seed: usize) -> Vec<usize> {
    let mut chosen = vec![seed];
    while chosen.len() < m {
        let mut best = (usize::MAX, -1.0);
        for (i, p) in pts.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let md = chosen.iter().map(|&c| d2(p, &pts[c])).fold(f64::INFINITY, f64::min);
            if md > best.1 {
                best = (i, md);
            }
        }
        chosen.push(best.0);
    }
    chosen
}

/// Kendall rank correlation (tau-a; inputs assumed tie-free).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
            s += a as i64;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let a = [[0.0, 0.0, 0.0]];
        let b = [[1.0, 0.0, 0.0]];
        assert_eq!(chamfer_t(&a, &b), 2.0);
        assert!((dcd(&a, &b, 1.0, 1.0, false) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let s = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let t = [[0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert_eq!(emd_enumerate(&s, &t), 2.0);
        assert_eq!(fps(&[[0.0; 3], [3.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], 3, 0), vec![0, 1, 2]);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }
}
