#![allow(dead_code)]

use pointsim::{Point3, PointCloud};
use proptest::prelude::*;

pub fn arrays(c: &PointCloud) -> Vec<[f64; 3]> {
    c.points().iter().map(|p| p.to_array()).collect()
}

pub fn cloud(rows: &[[f64; 3]]) -> PointCloud {
    PointCloud::from_arrays(rows).unwrap()
}

/// Continuous coordinates in a unit-ish box.
pub fn smooth_cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..=max).prop_map(|v| cloud(&v))
}

/// Coordinates on a coarse lattice, so distance ties and duplicates are common.
pub fn lattice_cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-3i32..=3), 1..=max).prop_map(|v| {
        PointCloud::new(v.iter().map(|c| Point3::new(c[0] as f64 * 0.25, c[1] as f64 * 0.25, c[2] as f64 * 0.25)).collect())
            .unwrap()
    })
}

pub fn any_cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop_oneof![smooth_cloud(max), lattice_cloud(max)]
}

pub fn sized(n: usize) -> impl Strategy<Value = PointCloud> {
    prop_oneof![
        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), n).prop_map(|v| cloud(&v)),
        prop::collection::vec(prop::array::uniform3(-2i32..=2), n)
            .prop_map(|v| cloud(&v.iter().map(|c| c.map(|x| x as f64 * 0.5)).collect::<Vec<_>>())),
    ]
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-15
}
