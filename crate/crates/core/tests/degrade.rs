mod common;

use pointsim::degrade::*;
use pointsim::metrics::*;
use pointsim::sampling::fps;
use pointsim::transport::emd_approx;
use pointsim::{DcdParams, NeighborIndex, PointCloud};
use proptest::prelude::*;

fn shape(seed: u64, n: usize) -> (PointCloud, Vec<f64>) {
    synth_shapes(ShapeKind::ALL[(seed % 4) as usize], n, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mixing_is_deterministic_and_sized(
        seed in 0u64..1000,
        n in 1usize..600,
        sigma in 0.0f64..0.05,
        (target, keep) in (16usize..256).prop_flat_map(|t| (Just(t), (t as f64 / 512.0)..=1.0)),
    ) {
        let (dense, _) = shape(seed, 512);
        let spec = DegradationSpec { seed, noise_sigma: sigma, imbalance_n: n, partial_keep_fraction: keep, target_size: target, ..Default::default() };
        let a = mix_noise_imbalance(&dense, &spec).unwrap();
        prop_assert_eq!(a.len(), target);
        prop_assert_eq!(a, mix_noise_imbalance(&dense, &spec).unwrap());
    }

    #[test]
    fn outlier_injection_replaces_the_floor_count(seed in 0u64..1000, fraction in 0.0f64..0.99, radius in 0.5f64..100.0) {
        let (c, _) = shape(seed, 128);
        let out = inject_outliers(&c, fraction, radius, seed).unwrap();
        prop_assert_eq!(out.len(), c.len());
        let moved = c.points().iter().zip(out.points()).filter(|(a, b)| a != b).count();
        prop_assert!(moved <= (fraction * 128.0).floor() as usize);
        let centre = c.centroid();
        for (a, b) in c.points().iter().zip(out.points()) {
            if a != b {
                let r = b.dist(&centre);
                prop_assert!(r >= 0.95 * radius - 1e-9 && r <= 1.05 * radius + 1e-9);
            }
        }
        prop_assert_eq!(out, inject_outliers(&c, fraction, radius, seed).unwrap());
    }

    #[test]
    fn curvature_mix_is_sized_and_distinct(seed in 0u64..1000, rc in 0.0f64..=1.0, m in 1usize..256) {
        let (dense, curv) = shape(seed, 256);
        let out = curvature_mix_sample(&dense, &curv, rc, m, seed).unwrap();
        prop_assert_eq!(out.len(), m);
        prop_assert_eq!(&out, &curvature_mix_sample(&dense, &curv, rc, m, seed).unwrap());
        let mut pts: Vec<[u64; 3]> = out.points().iter().map(|p| p.to_array().map(f64::to_bits)).collect();
        pts.sort_unstable();
        pts.dedup();
        prop_assert_eq!(pts.len(), m);
    }
}

#[test]
fn partial_region_must_hold_the_target() {
    let (dense, _) = shape(1, 512);
    let spec = DegradationSpec { partial_keep_fraction: 0.1, target_size: 256, ..Default::default() };
    assert!(matches!(mix_noise_imbalance(&dense, &spec), Err(pointsim::Error::InsufficientPoints { .. })));
}

#[test]
fn zero_fraction_and_zero_ratio_are_identities() {
    let (c, curv) = shape(3, 300);
    assert_eq!(inject_outliers(&c, 0.0, 10.0, 1).unwrap(), c);
    assert_eq!(curvature_mix_sample(&c, &curv, 0.0, 64, 9).unwrap(), fps(&c, 64, 0).unwrap());
    assert!(matches!(curvature_mix_sample(&c, &curv[1..], 0.5, 64, 9), Err(pointsim::Error::ShapeMismatch { .. })));
}

#[test]
fn synthetic_shapes() {
    for kind in ShapeKind::ALL {
        let (a, ca) = synth_shapes(kind, 2048, 5).unwrap();
        let (b, cb) = synth_shapes(kind, 2048, 5).unwrap();
        assert_eq!((a.clone(), ca.clone()), (b, cb));
        assert_eq!(a.len(), 2048);
        assert!(ca.iter().all(|&k| k.is_finite() && k > 0.0));
    }
    let (_, ks) = synth_shapes(ShapeKind::Sphere, 256, 1).unwrap();
    assert!(ks.iter().all(|&k| k == ks[0]));

    let (t, _) = synth_shapes(ShapeKind::Torus, 2048, 2).unwrap();
    let idx = NeighborIndex::new(&t);
    let min_d = t.points().iter().map(|p| idx.nearest(p, 2)[1].dist()).fold(f64::INFINITY, f64::min);
    assert!(min_d > 0.0);
    let (lo, hi) = t.bounds();
    let outer = TORUS_MAJOR + TORUS_MINOR;
    for (l, h, ext) in [(lo.x, hi.x, outer), (lo.y, hi.y, outer), (lo.z, hi.z, TORUS_MINOR)] {
        assert!(h <= ext + 1e-12 && -l <= ext + 1e-12);
        assert!(h >= 0.97 * ext && -l >= 0.97 * ext);
    }
}

#[test]
fn dcd_rises_with_imbalance_on_clean_mixtures() {
    // Fewer complete points next to the fixed-size partial component means
    // a more imbalanced mixture.
    let ns = [4096, 2048, 1024, 512, 256];
    let mut dcd_sum = [0.0; 5];
    for seed in 0..4u64 {
        let (dense, _) = shape(seed, 20480);
        let gt = fps(&dense, 2048, 0).unwrap();
        for (k, &n) in ns.iter().enumerate() {
            let spec = DegradationSpec { seed, imbalance_n: n, partial_keep_fraction: 1.0, ..Default::default() };
            let out = mix_noise_imbalance(&dense, &spec).unwrap();
            dcd_sum[k] += dcd(&out, &gt, &DcdParams::evaluation()).unwrap().value;
        }
    }
    assert!(dcd_sum.windows(2).all(|w| w[1] > w[0]), "{dcd_sum:?}");
}

#[test]
fn chamfer_jumps_under_heavy_noise() {
    let (dense, _) = shape(0, 20480);
    let gt = fps(&dense, 2048, 0).unwrap();
    let spacing = mean_nn_spacing(&gt);
    let cd = |k: f64| {
        let spec = DegradationSpec { noise_sigma: k * spacing, ..Default::default() };
        chamfer(&mix_noise_imbalance(&dense, &spec).unwrap(), &gt, ChamferVariant::T).value
    };
    assert!(cd(3.0) > 5.0 * cd(0.0));
}

#[test]
fn one_far_outlier() {
    let (dense, _) = shape(0, 8192);
    let c = fps(&dense, 2048, 0).unwrap();
    let out = inject_outliers(&c, 1.0 / 2048.0, 10.0, 4).unwrap();
    let n = 2048.0;
    let dc = chamfer(&out, &c, ChamferVariant::T).value - chamfer(&c, &c, ChamferVariant::T).value;
    assert!(dc >= 81.0 / n);
    let p = DcdParams::evaluation();
    let dd = dcd(&out, &c, &p).unwrap().value - dcd(&c, &c, &p).unwrap().value;
    assert!(dd <= 2.0 / n + 1e-6);
    let half = inject_outliers(&c, 0.5, 10.0, 4).unwrap();
    assert!(dcd(&half, &c, &p).unwrap().value <= 1.0);
}

#[test]
fn curvature_sampling_moves_dcd_and_emd() {
    let mut rows = [[0.0; 2]; 4];
    for seed in 0..3u64 {
        let (dense, curv) = shape(seed, 20480);
        let reference = fps(&dense, 2048, 1).unwrap();
        for (i, rc) in [0.0, 0.25, 0.5, 0.75].into_iter().enumerate() {
            let out = curvature_mix_sample(&dense, &curv, rc, 2048, seed).unwrap();
            rows[i][0] += dcd(&out, &reference, &DcdParams::evaluation()).unwrap().value;
            rows[i][1] += emd_approx(&out, &reference, 0.004, 200_000).unwrap().total_cost;
        }
    }
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0] && w[1][1] > w[0][1]), "{rows:?}");
}

#[test]
fn spec_json_round_trip() {
    let spec = DegradationSpec { seed: 9, noise_sigma: 0.01, imbalance_n: 512, ..Default::default() };
    let text = serde_json::to_string(&spec).unwrap();
    assert!(text.contains("\"partial_keep_fraction\""));
    assert_eq!(serde_json::from_str::<DegradationSpec>(&text).unwrap(), spec);
    assert!(serde_json::from_str::<DegradationSpec>(r#"{"sigma": 1}"#).is_err());
    let partial: DegradationSpec = serde_json::from_str(r#"{"imbalance_n": 7}"#).unwrap();
    assert_eq!(partial.target_size, 2048);
}
