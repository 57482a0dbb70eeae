mod common;

use common::*;
use pointsim::metrics::*;
use pointsim::{DcdParams, ExponentMode, Point3, PointCloud};
use pointsim_oracle as oracle;
use proptest::prelude::*;

const REL: f64 = 1e-12;

fn params() -> impl Strategy<Value = DcdParams> {
    (
        prop::sample::select(vec![1.0, 50.0, 1000.0]),
        prop::sample::select(vec![0.0, 0.5, 1.0]),
        prop::bool::ANY,
    )
        .prop_map(|(alpha, lambda, sq)| DcdParams {
            alpha,
            lambda,
            exponent_mode: if sq { ExponentMode::Squared } else { ExponentMode::Euclidean },
        })
}

fn squared(p: &DcdParams) -> bool {
    p.exponent_mode == ExponentMode::Squared
}

fn equal_pair(max: usize) -> impl Strategy<Value = (PointCloud, PointCloud)> {
    (1..=max).prop_flat_map(|n| (sized(n), sized(n)))
}

fn decomposes(r: &MetricReport) -> bool {
    let total: f64 = r.per_point_src.iter().chain(&r.per_point_tgt).sum();
    close(total, r.value, 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chamfer_and_hausdorff_match_brute_force(a in any_cloud(48), b in any_cloud(48)) {
        let (x, y) = (arrays(&a), arrays(&b));
        prop_assert!(close(chamfer(&a, &b, ChamferVariant::T).value, oracle::chamfer_t(&x, &y), REL));
        prop_assert!(close(chamfer(&a, &b, ChamferVariant::P).value, oracle::chamfer_p(&x, &y), REL));
        prop_assert!(close(hausdorff(&a, &b), oracle::hausdorff(&x, &y), REL));
    }

    #[test]
    fn dcd_matches_brute_force((a, b) in equal_pair(48), p in params()) {
        let got = dcd(&a, &b, &p).unwrap();
        let want = oracle::dcd(&arrays(&a), &arrays(&b), p.alpha, p.lambda, squared(&p));
        prop_assert!(close(got.value, want, REL), "{} vs {}", got.value, want);
        prop_assert!(decomposes(&got));
        prop_assert!((0.0..=1.0).contains(&got.value), "{}", got.value);
    }

    #[test]
    fn unequal_variants_match_brute_force(a in any_cloud(64), b in any_cloud(40), p in params()) {
        let (x, y) = (arrays(&a), arrays(&b));
        let e = dcd_unequal(&a, &b, &p, UnequalVariant::E).unwrap();
        prop_assert!(close(e.value, oracle::dcd_e(&x, &y, p.alpha, p.lambda, squared(&p)), REL));
        prop_assert!((0.0..=1.0).contains(&e.value), "{}", e.value);
        prop_assert!(decomposes(&e));
        prop_assert_eq!(e.per_point_src.len(), a.len());
        prop_assert_eq!(e.per_point_tgt.len(), b.len());
        if a.len() != b.len() {
            let n = dcd_unequal(&a, &b, &p, UnequalVariant::Naive).unwrap();
            prop_assert!(close(n.value, oracle::dcd_naive(&x, &y, p.alpha, p.lambda, squared(&p)), REL));
            prop_assert!(decomposes(&n));
        }
    }

    #[test]
    fn symmetric_under_swap((a, b) in equal_pair(40), p in params()) {
        for v in [ChamferVariant::T, ChamferVariant::P] {
            prop_assert_eq!(chamfer(&a, &b, v).value, chamfer(&b, &a, v).value);
        }
        prop_assert_eq!(hausdorff(&a, &b), hausdorff(&b, &a));
        prop_assert_eq!(dcd(&a, &b, &p).unwrap().value, dcd(&b, &a, &p).unwrap().value);
    }

    #[test]
    fn zero_on_identical_clouds(a in smooth_cloud(64), p in params()) {
        prop_assert_eq!(chamfer(&a, &a, ChamferVariant::T).value, 0.0);
        prop_assert_eq!(chamfer(&a, &a, ChamferVariant::P).value, 0.0);
        prop_assert_eq!(hausdorff(&a, &a), 0.0);
        prop_assert_eq!(dcd(&a, &a, &p).unwrap().value, 0.0);
    }

    #[test]
    fn query_counts_conserve_source_size(a in any_cloud(64), b in any_cloud(64)) {
        let f = query_frequencies(&a, &pointsim::NeighborIndex::new(&b));
        prop_assert_eq!(f.total(), a.len() as u64);
        prop_assert_eq!(f.counts, oracle::counts(&arrays(&a), &arrays(&b)));
    }

    #[test]
    fn taylor_relation(a in smooth_cloud(32), seed in 0u64..1000) {
        // Every point of b is a tiny displacement of its partner in a, so
        // each nearest pair is the partner and every count is one.
        let mut b = Vec::new();
        let mut s = seed;
        for p in a.points() {
            s = pointsim::rng::mix64(s);
            let jitter = (s % 1000) as f64 * 1e-6;
            b.push(*p + Point3::new(jitter, -jitter, 0.5 * jitter));
        }
        let b = PointCloud::new(b).unwrap();
        let pair = CloudPair::new(&a, &b);
        let min_sep = a.points().iter().enumerate().flat_map(|(i, p)| {
            a.points()[i + 1..].iter().map(move |q| p.dist(q))
        }).fold(f64::INFINITY, f64::min);
        prop_assume!(min_sep > 0.01);
        prop_assume!(pair.forward.iter().enumerate().all(|(i, &(j, _))| i == j));
        prop_assume!(pair.backward.iter().enumerate().all(|(i, &(j, _))| i == j));
        let p = DcdParams::training(1.0, 1.0).with_mode(ExponentMode::Euclidean);
        let d = dcd(&a, &b, &p).unwrap().value;
        let cd = chamfer(&a, &b, ChamferVariant::P).value;
        let max_d = pair.forward.iter().map(|&(_, d2)| d2.sqrt()).fold(0.0, f64::max);
        prop_assert!((d - 0.5 * cd).abs() <= max_d * max_d);
    }

    #[test]
    fn duplicating_targets_never_lowers_their_counts(a in smooth_cloud(40), b in smooth_cloud(40), pick in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let before = CloudPair::new(&a, &b).forward_frequency();
        let dup: Vec<usize> = pick.iter().map(|i| i.index(b.len())).collect();
        // Copies go to the end, so the originals keep their (lower) ids and win ties.
        let mut pts = b.points().to_vec();
        for &j in &dup {
            pts.push(b.get(j));
        }
        let b2 = PointCloud::new(pts).unwrap();
        let after = CloudPair::new(&a, &b2).forward_frequency();
        for &j in &dup {
            prop_assert!(after.counts[j] >= before.counts[j]);
        }
    }
}

#[test]
fn duplicated_cloud_scores_zero_under_e_variant() {
    let base = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.3, 0.3, 0.3]]);
    let twice = base.concat(&base);
    let r = dcd_unequal(&twice, &base, &DcdParams::evaluation(), UnequalVariant::E).unwrap();
    assert_eq!(r.forward.counts, vec![2; 4]);
    assert_eq!(r.value, 0.0);
    let x = arrays(&twice);
    let y = arrays(&base);
    assert_eq!(oracle::dcd_e(&x, &y, 1000.0, 1.0, true), 0.0);
}

#[test]
fn equal_sizes_reduce_to_dcd() {
    let a = cloud(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.4, 0.0]]);
    let b = cloud(&[[0.0, 0.05, 0.0], [0.3, 0.0, 0.0], [0.0, 0.0, 0.2]]);
    let p = DcdParams::training(10.0, 1.0);
    let d = dcd(&a, &b, &p).unwrap();
    for v in [UnequalVariant::Naive, UnequalVariant::E] {
        assert_eq!(dcd_unequal(&a, &b, &p, v).unwrap(), d);
    }
}

#[test]
fn naive_variant_goes_negative() {
    // eta = 2, but the small point at x = 5 is queried only once, so its
    // weight eta / n = 2 pushes the coincident pair's term below zero.
    let big = cloud(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [5.0, 0.0, 0.0]]);
    let small = cloud(&[[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]]);
    let r = dcd_unequal(&big, &small, &DcdParams::training(1.0, 1.0), UnequalVariant::Naive).unwrap();
    assert!(r.per_point_src.iter().any(|&c| c < 0.0));
    let e = dcd_unequal(&big, &small, &DcdParams::training(1.0, 1.0), UnequalVariant::E).unwrap();
    assert!(e.per_point_src.iter().all(|&c| c >= 0.0));
}

#[test]
fn outlier_moves_dcd_by_at_most_one_point_share() {
    // A line of points, with one point of s2 pushed far away.
    let n = 64;
    let a: Vec<[f64; 3]> = (0..n).map(|i| [i as f64 * 0.01, 0.0, 0.0]).collect();
    let mut b = a.clone();
    let d = 0.5;
    b[n - 1][1] = d;
    let s1 = cloud(&a);
    let near = cloud(&b);
    b[n - 1][1] = 10.0 * d;
    let far = cloud(&b);
    let p = DcdParams::evaluation();
    assert!((-p.alpha * d * d).exp() < 1e-6);
    let dd = (dcd(&s1, &far, &p).unwrap().value - dcd(&s1, &near, &p).unwrap().value).abs();
    assert!(dd <= 1.0 / n as f64 + 1.0 / n as f64 + 1e-6);
    let dc = chamfer(&s1, &far, ChamferVariant::T).value - chamfer(&s1, &near, ChamferVariant::T).value;
    assert!(dc >= 99.0 * d * d / n as f64);
}
