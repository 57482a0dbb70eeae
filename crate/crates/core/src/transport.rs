//! Earth Mover's Distance as a minimum-cost bijection.
//!
//! [`emd_exact`] solves the assignment problem optimally with the O(n^3)
//! shortest-augmenting-path Hungarian method; [`emd_approx`] runs a forward
//! auction with epsilon scaling, which scales to a few thousand points.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Largest instance accepted by the exact solver.
pub const EXACT_SIZE_LIMIT: usize = 512;

/// Default relative accuracy of the auction solver.
pub const DEFAULT_EPS: f64 = 0.004;
/// Default cap on auction bidding rounds.
pub const DEFAULT_MAX_ITERS: usize = 3000;

const EPS_SCALING_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// `mapping[i]` is the point of the second cloud matched to point `i` of the first.
    pub mapping: Vec<usize>,
    /// Sum of Euclidean distances over matched pairs.
    pub total_cost: f64,
    pub iterations: usize,
    /// Relative gap `(cost - lower bound) / cost`; 0 for the exact solver.
    pub approx_error: f64,
    /// False when the auction hit `max_iters`; the mapping is then a greedy
    /// completion of the best partial assignment.
    pub converged: bool,
}

impl AssignmentResult {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.mapping.len()];
        self.mapping.iter().all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmdNormalization {
    Sum,
    #[default]
    Mean,
}

pub fn emd_value(result: &AssignmentResult, normalize: EmdNormalization) -> f64 {
    match normalize {
        EmdNormalization::Sum => result.total_cost,
        EmdNormalization::Mean if result.mapping.is_empty() => 0.0,
        EmdNormalization::Mean => result.total_cost / result.mapping.len() as f64,
    }
}

fn check_sizes(s1: &PointCloud, s2: &PointCloud) -> Result<usize> {
    if s1.len() != s2.len() {
        return Err(Error::CardinalityMismatch { left: s1.len(), right: s2.len() });
    }
    Ok(s1.len())
}

fn mapping_cost(s1: &PointCloud, s2: &PointCloud, mapping: &[usize]) -> f64 {
    mapping.iter().enumerate().map(|(i, &j)| s1.get(i).dist(&s2.get(j))).sum()
}

/// Row-major `n x n` Euclidean cost matrix.
pub fn cost_matrix(s1: &PointCloud, s2: &PointCloud) -> Vec<f64> {
    let b = s2.points();
    s1.points().iter().flat_map(|p| b.iter().map(move |q| p.dist(q))).collect()
}

/// Optimal assignment for `|s1| = |s2| <= 512`.
pub fn emd_exact(s1: &PointCloud, s2: &PointCloud) -> Result<AssignmentResult> {
    let n = check_sizes(s1, s2)?;
    if n > EXACT_SIZE_LIMIT {
        return Err(Error::SizeLimitExceeded { size: n, limit: EXACT_SIZE_LIMIT });
    }
    let cost = cost_matrix(s1, s2);
    let mapping = hungarian(&cost, n);
    Ok(AssignmentResult {
        total_cost: mapping_cost(s1, s2, &mapping),
        mapping,
        iterations: n,
        approx_error: 0.0,
        converged: true,
    })
}

/// Minimum-cost perfect matching on a dense `n x n` matrix using row
/// potentials `u`, column potentials `v` and Dijkstra-style augmentation.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based columns; column 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let base = (i0 - 1) * n;
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[base + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut mapping = vec![0usize; n];
    for j in 1..=n {
        mapping[owner[j] - 1] = j - 1;
    }
    mapping
}

/// Approximate assignment by an epsilon-scaling forward auction.
///
/// `eps` is a relative accuracy target: the final bidding increment is
/// `eps * LB / n` with `LB` a lower bound on the optimal cost, which bounds
/// the result by `(1 + eps) * optimum`. `max_iters` caps the number of
/// bidding rounds summed over all scaling phases; a round lets every
/// unassigned point place one bid.
pub fn emd_approx(
    s1: &PointCloud,
    s2: &PointCloud,
    eps: f64,
    max_iters: usize,
) -> Result<AssignmentResult> {
    let n = check_sizes(s1, s2)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParam(format!("eps must be > 0, got {eps}")));
    }
    let cost = cost_matrix(s1, s2);
    let mut auction = Auction::new(&cost, n);
    let converged = auction.run(eps, max_iters);
    let mapping = auction.complete_mapping();
    let total_cost = mapping_cost(s1, s2, &mapping);
    let lower = auction.dual_bound().max(auction.row_col_bound);
    let approx_error =
        if total_cost > 0.0 { ((total_cost - lower) / total_cost).max(0.0) } else { 0.0 };
    Ok(AssignmentResult { mapping, total_cost, iterations: auction.rounds, approx_error, converged })
}

struct Auction<'a> {
    cost: &'a [f64],
    n: usize,
    prices: Vec<f64>,
    owner: Vec<Option<usize>>,
    assigned: Vec<Option<usize>>,
    rounds: usize,
    row_col_bound: f64,
    max_cost: f64,
}

impl<'a> Auction<'a> {
    fn new(cost: &'a [f64], n: usize) -> Self {
        let mut col_min = vec![f64::INFINITY; n];
        let mut row_sum = 0.0;
        let mut max_cost = 0.0f64;
        for row in cost.chunks_exact(n.max(1)) {
            let mut rmin = f64::INFINITY;
            for (j, &c) in row.iter().enumerate() {
                rmin = rmin.min(c);
                col_min[j] = col_min[j].min(c);
                max_cost = max_cost.max(c);
            }
            row_sum += rmin;
        }
        let col_sum: f64 = col_min.iter().sum();
        Self {
            cost,
            n,
            prices: vec![0.0; n],
            owner: vec![None; n],
            assigned: vec![None; n],
            rounds: 0,
            row_col_bound: if n == 0 { 0.0 } else { row_sum.max(col_sum) },
            max_cost,
        }
    }

    fn run(&mut self, eps: f64, max_iters: usize) -> bool {
        let n = self.n;
        if n == 0 || self.max_cost == 0.0 {
            self.assigned = (0..n).map(Some).collect();
            self.owner = (0..n).map(Some).collect();
            return true;
        }
        let floor = 1e-9 * self.max_cost / n as f64;
        let eps_final = (eps * self.row_col_bound / n as f64).max(floor);
        let mut step = (self.max_cost / 4.0).max(eps_final);
        loop {
            if !self.phase(step, max_iters) {
                return false;
            }
            if step <= eps_final {
                return true;
            }
            step = (step / EPS_SCALING_FACTOR).max(eps_final);
        }
    }

    /// One auction at a fixed increment; prices carry over between phases.
    fn phase(&mut self, step: f64, max_iters: usize) -> bool {
        let n = self.n;
        self.owner.fill(None);
        self.assigned.fill(None);
        let mut queue: Vec<usize> = (0..n).collect();
        let mut next = Vec::new();
        while !queue.is_empty() {
            if self.rounds >= max_iters {
                return false;
            }
            self.rounds += 1;
            for &person in &queue {
                let row = &self.cost[person * n..(person + 1) * n];
                let (mut best, mut best_j, mut second) = (f64::INFINITY, 0usize, f64::INFINITY);
                for (j, (&c, &p)) in row.iter().zip(self.prices.iter()).enumerate() {
                    let v = c + p;
                    if v < best {
                        second = best;
                        best = v;
                        best_j = j;
                    } else if v < second {
                        second = v;
                    }
                }
                let raise = if second.is_finite() { second - best + step } else { step };
                self.prices[best_j] += raise;
                if let Some(prev) = self.owner[best_j].replace(person) {
                    self.assigned[prev] = None;
                    next.push(prev);
                }
                self.assigned[person] = Some(best_j);
            }
            std::mem::swap(&mut queue, &mut next);
            next.clear();
        }
        true
    }

    /// Assignment with any unassigned rows greedily given their cheapest free column.
    fn complete_mapping(&self) -> Vec<usize> {
        let n = self.n;
        let mut taken: Vec<bool> = self.owner.iter().map(Option::is_some).collect();
        (0..n)
            .map(|i| {
                self.assigned[i].unwrap_or_else(|| {
                    let row = &self.cost[i * n..(i + 1) * n];
                    let j = (0..n)
                        .filter(|&j| !taken[j])
                        .min_by(|&a, &b| row[a].total_cmp(&row[b]))
                        .expect("a free column exists while a row is unassigned");
                    taken[j] = true;
                    j
                })
            })
            .collect()
    }

    /// Dual objective `sum_i min_j (c_ij + p_j) - sum_j p_j`, a lower bound on the optimum.
    fn dual_bound(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let profit: f64 = self
            .cost
            .chunks_exact(n)
            .map(|row| row.iter().zip(&self.prices).map(|(c, p)| c + p).fold(f64::INFINITY, f64::min))
            .sum();
        profit - self.prices.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_arrays(rows).unwrap()
    }

    #[test]
    fn two_point_instance() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let b = cloud(&[[0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
        let r = emd_exact(&a, &b).unwrap();
        assert_eq!(r.mapping, vec![0, 1]);
        assert_eq!(r.total_cost, 2.0);
        assert_eq!(emd_value(&r, EmdNormalization::Mean), 1.0);
        assert_eq!(emd_value(&r, EmdNormalization::Sum), 2.0);
        let approx = emd_approx(&a, &b, DEFAULT_EPS, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(approx.total_cost, 2.0);
        assert!(approx.converged);
    }

    #[test]
    fn identity_costs_nothing() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.7, 0.1]]);
        let r = emd_exact(&a, &a).unwrap();
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(emd_value(&r, EmdNormalization::Mean), 0.0);
        for eps in [1.0, 0.1, 0.004] {
            let r = emd_approx(&a, &a, eps, DEFAULT_MAX_ITERS).unwrap();
            assert_eq!(r.total_cost, 0.0);
            assert_eq!(r.approx_error, 0.0);
        }
    }

    #[test]
    fn guards() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!(matches!(emd_exact(&a, &b), Err(Error::CardinalityMismatch { .. })));
        assert!(matches!(emd_approx(&a, &b, 0.01, 10), Err(Error::CardinalityMismatch { .. })));
        assert!(matches!(emd_approx(&a, &a, 0.0, 10), Err(Error::InvalidParam(_))));
        let big = PointCloud::new(vec![crate::Point3::ORIGIN; 513]).unwrap();
        assert!(matches!(emd_exact(&big, &big), Err(Error::SizeLimitExceeded { size: 513, .. })));
    }

    #[test]
    fn iteration_cap_still_returns_a_bijection() {
        let a: Vec<[f64; 3]> = (0..40).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let b: Vec<[f64; 3]> = (0..40).map(|i| [i as f64 * 0.1 + 0.05, 0.2, 0.0]).collect();
        let (a, b) = (cloud(&a), cloud(&b));
        let r = emd_approx(&a, &b, 1e-6, 1).unwrap();
        assert!(!r.converged);
        assert!(r.is_bijection());
        assert!(r.total_cost >= emd_exact(&a, &b).unwrap().total_cost - 1e-12);
    }

    #[test]
    fn duplicate_points_are_fine() {
        let a = cloud(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let exact = emd_exact(&a, &b).unwrap();
        assert_eq!(exact.total_cost, 1.0);
        let approx = emd_approx(&a, &b, 0.004, 3000).unwrap();
        assert!(approx.is_bijection());
        assert!((approx.total_cost - 1.0).abs() <= 0.004);
    }
}
