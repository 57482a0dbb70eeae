//! Exact k-nearest-neighbour index (kd-tree).
//!
//! Results are exact and ordered by `(squared distance, point id)`, so they
//! coincide with a brute-force scan including tie order.

use crate::cloud::{Point3, PointCloud};
use crate::error::Result;

const LEAF_SIZE: usize = 12;

/// One query result. `dist2` is the squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist2.sqrt()
    }

    #[inline]
    fn precedes(&self, d2: f64, id: usize) -> bool {
        self.dist2 < d2 || (self.dist2 == d2 && self.id < id)
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Immutable spatial index over a point cloud.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point3>,
    // leaf storage in tree order
    ordered: Vec<Point3>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        let points = cloud.points().to_vec();
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build(&points, &mut ids, 0, &mut nodes);
        let ordered = ids.iter().map(|&i| points[i as usize]).collect();
        Self { points, ordered, ids, nodes }
    }

    /// Validating constructor from raw points.
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        Ok(Self::new(&PointCloud::new(points)?))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Nearest indexed point: `(id, squared distance)`.
    pub fn nearest_one(&self, q: &Point3) -> (usize, f64) {
        let mut best = Neighbor { id: usize::MAX, dist2: f64::INFINITY };
        self.search_one(0, q, &mut best);
        (best.id, best.dist2)
    }

    /// The `min(k, len)` nearest points, sorted by distance then id.
    pub fn nearest(&self, q: &Point3, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        if k == 1 {
            let (id, dist2) = self.nearest_one(q);
            return vec![Neighbor { id, dist2 }];
        }
        let mut heap = Vec::with_capacity(k + 1);
        self.search_k(0, q, k, &mut heap);
        heap
    }

    fn search_one(&self, node: usize, q: &Point3, best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let d2 = q.dist2(&self.ordered[slot]);
                    let id = self.ids[slot] as usize;
                    if !best.precedes(d2, id) {
                        *best = Neighbor { id, dist2: d2 };
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.coord(axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_one(near as usize, q, best);
                // Far side lower bound; equality must still be visited for the id tie-break.
                if diff * diff <= best.dist2 {
                    self.search_one(far as usize, q, best);
                }
            }
        }
    }

    fn search_k(&self, node: usize, q: &Point3, k: usize, heap: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let d2 = q.dist2(&self.ordered[slot]);
                    let id = self.ids[slot] as usize;
                    if heap.len() == k && heap[k - 1].precedes(d2, id) {
                        continue;
                    }
                    let pos = heap.partition_point(|n| n.precedes(d2, id));
                    heap.insert(pos, Neighbor { id, dist2: d2 });
                    heap.truncate(k);
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.coord(axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_k(near as usize, q, k, heap);
                let worst = if heap.len() == k { heap[k - 1].dist2 } else { f64::INFINITY };
                if diff * diff <= worst {
                    self.search_k(far as usize, q, k, heap);
                }
            }
        }
    }
}

fn build(points: &[Point3], ids: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let me = nodes.len();
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + ids.len()) as u32 });
        return me as u32;
    }
    let axis = widest_axis(points, ids);
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize].coord(axis).total_cmp(&points[b as usize].coord(axis))
    });
    let value = points[ids[mid] as usize].coord(axis);
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = ids.split_at_mut(mid);
    let left = build(points, lo, offset, nodes);
    let right = build(points, hi, offset + mid, nodes);
    nodes[me] = Node::Split { axis: axis as u8, value, left, right };
    me as u32
}

fn widest_axis(points: &[Point3], ids: &[u32]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in ids {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p.coord(a));
            hi[a] = hi[a].max(p.coord(a));
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> =
            points.iter().enumerate().map(|(i, p)| (i, q.dist2(p))).collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_point_index() {
        let c = PointCloud::from_arrays(&[[1.0, 2.0, 3.0]]).unwrap();
        let idx = NeighborIndex::new(&c);
        let r = idx.nearest(&Point3::new(1.0, 2.0, 7.0), 3);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].id, 0);
        assert_eq!(r[0].dist(), 4.0);
    }

    #[test]
    fn hand_checked_nearest() {
        let c = PointCloud::from_arrays(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        let idx = NeighborIndex::new(&c);
        let r = idx.nearest(&Point3::ORIGIN, 1);
        assert_eq!(r, vec![Neighbor { id: 0, dist2: 1.0 }]);
        let all = idx.nearest(&Point3::ORIGIN, 10);
        assert_eq!(all.iter().map(|n| n.id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(all[1].dist(), 2.0);
    }

    #[test]
    fn query_at_indexed_point_returns_it_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_cloud(&mut rng, 300);
        let idx = NeighborIndex::new(&c);
        for i in (0..300).step_by(17) {
            let r = idx.nearest(&c.get(i), 2);
            assert_eq!(r[0].id, i);
            assert_eq!(r[0].dist2, 0.0);
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        // a lattice has many equidistant neighbours
        let mut pts = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    pts.push(Point3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        pts.push(Point3::new(3.0, 3.0, 3.0)); // duplicate with a higher id
        let c = PointCloud::new(pts.clone()).unwrap();
        let idx = NeighborIndex::new(&c);
        for q in [Point3::new(3.5, 3.5, 3.5), Point3::new(3.0, 3.0, 3.0), Point3::new(0.5, 7.0, 2.5)] {
            for k in [1, 2, 5, 9, 27] {
                let got: Vec<_> = idx.nearest(&q, k).iter().map(|n| (n.id, n.dist2)).collect();
                assert_eq!(got, brute(&pts, &q, k), "q={q:?} k={k}");
            }
        }
    }

    #[test]
    fn matches_brute_force_on_2048_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_cloud(&mut rng, 2048);
        let idx = NeighborIndex::new(&c);
        for _ in 0..100 {
            let q = Point3::new(rng.random(), rng.random(), rng.random());
            for k in [1, 4, 16] {
                let got: Vec<_> = idx.nearest(&q, k).iter().map(|n| (n.id, n.dist2)).collect();
                assert_eq!(got, brute(c.points(), &q, k));
            }
        }
    }

    #[test]
    fn equal_clouds_answer_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_cloud(&mut rng, 500);
        let (a, b) = (NeighborIndex::new(&c), NeighborIndex::new(&c.clone()));
        for _ in 0..50 {
            let q = Point3::new(rng.random(), rng.random(), rng.random());
            assert_eq!(a.nearest(&q, 7), b.nearest(&q, 7));
        }
    }
}
