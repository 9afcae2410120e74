mod common;

use cnvks_core::kernel::{adaptive_bandwidth, Aggregator};
use cnvks_core::{
    aggregate, t_max, Bandwidth, Direction, KernelShape, KernelSpec, MarkerTestTrack, TestResult,
    TransformKind, TransformSpec,
};
use common::oracle::{brute_force, random_instance, KINDS, SHAPES};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_against_oracle(seed: u64, shape: KernelShape, by_markers: bool, spec: TransformSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_instance(&mut rng, 120, shape, by_markers, spec);
    let tests = MarkerTestTrack::new(inst.tests.clone()).unwrap();
    let profile = aggregate(&tests, &inst.positions, inst.kernel, spec).unwrap();
    let expected = brute_force(&inst);
    for (j, e) in expected.iter().enumerate() {
        match (profile.get(j), e) {
            (None, None) => {}
            (Some(a), Some(b)) => assert!(
                (a - b).abs() <= 1e-12,
                "seed {seed} {:?} {spec:?} marker {j}: {a} vs {b}",
                inst.kernel
            ),
            (a, b) => panic!(
                "seed {seed} {:?} marker {j}: mask {a:?} vs {b:?}",
                inst.kernel
            ),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), shape in 0usize..2, by_markers: bool, kind in 0usize..3, signed: bool) {
        check_against_oracle(seed, SHAPES[shape], by_markers, TransformSpec::new(KINDS[kind], signed));
    }

    #[test]
    fn aggregate_lies_within_window_range(seed in any::<u64>(), shape in 0usize..2, by_markers: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = TransformSpec::new(TransformKind::Log, true);
        let inst = random_instance(&mut rng, 80, SHAPES[shape], by_markers, spec);
        let agg = Aggregator::new(&inst.positions, inst.kernel).unwrap();
        let t: Vec<f64> = inst.tests.iter().map(|r| cnvks_core::transform(r, spec).unwrap()).collect();
        let mut out = Vec::new();
        agg.aggregate_values(&t, &mut out);
        for (j, v) in out.iter().enumerate() {
            if let Some((start, w)) = agg.weights(j) {
                let window = &t[start..start + w.len()];
                let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            } else {
                prop_assert!(v.is_nan());
            }
        }
    }

    #[test]
    fn constant_inputs_aggregate_to_the_constant(c in -5.0f64..5.0, j in 5usize..60, k in 1usize..5, shape in 0usize..2) {
        let positions: Vec<u64> = (0..j as u64).map(|i| i * 37 + i * i).collect();
        let agg = Aggregator::new(&positions, KernelSpec::new(SHAPES[shape], Bandwidth::Markers(k))).unwrap();
        let mut out = Vec::new();
        agg.aggregate_values(&vec![c; j], &mut out);
        for v in out.iter().filter(|v| !v.is_nan()) {
            prop_assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_support_holds_at_least_k_markers(seed in any::<u64>(), k in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 60, KernelShape::Flat, true, TransformSpec::new(TransformKind::P, false));
        let k = k.min(inst.positions.len());
        for &target in &inst.positions {
            let s = adaptive_bandwidth(&inst.positions, target, k).unwrap();
            prop_assert!(s.len() >= k);
            let inside = inst.positions.iter().filter(|&&p| p.abs_diff(target) as f64 <= s.h).count();
            prop_assert_eq!(inside, s.len());
        }
    }

    #[test]
    fn larger_p_values_never_raise_the_unsigned_profile(seed in any::<u64>(), bump in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = TransformSpec::new(TransformKind::Z, false);
        let inst = random_instance(&mut rng, 60, KernelShape::Epanechnikov, true, spec);
        let raised: Vec<TestResult> = inst.tests.iter().map(|r| TestResult { p: (r.p + bump).min(1.0), direction: r.direction }).collect();
        let a = aggregate(&MarkerTestTrack::new(inst.tests.clone()).unwrap(), &inst.positions, inst.kernel, spec).unwrap();
        let b = aggregate(&MarkerTestTrack::new(raised).unwrap(), &inst.positions, inst.kernel, spec).unwrap();
        for j in 0..inst.positions.len() {
            if let (Some(x), Some(y)) = (a.get(j), b.get(j)) {
                prop_assert!(y <= x + 1e-12);
            }
        }
    }

    #[test]
    fn flipping_every_sign_negates_the_signed_profile(seed in any::<u64>(), kind in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = TransformSpec::new(KINDS[kind], true);
        let inst = random_instance(&mut rng, 60, KernelShape::Flat, false, spec);
        let flipped: Vec<TestResult> = inst.tests.iter().map(|r| TestResult {
            p: r.p,
            direction: r.direction.map(|d| match d { Direction::Positive => Direction::Negative, Direction::Negative => Direction::Positive }),
        }).collect();
        let a = aggregate(&MarkerTestTrack::new(inst.tests.clone()).unwrap(), &inst.positions, inst.kernel, spec).unwrap();
        let b = aggregate(&MarkerTestTrack::new(flipped).unwrap(), &inst.positions, inst.kernel, spec).unwrap();
        for j in 0..inst.positions.len() {
            if let (Some(x), Some(y)) = (a.get(j), b.get(j)) {
                prop_assert!((x + y).abs() < 1e-12);
            }
        }
        if a.valid.iter().any(|&v| v) {
            prop_assert_eq!(t_max(&a, true).unwrap(), t_max(&b, true).unwrap());
        }
    }

    #[test]
    fn signed_profile_with_positive_signs_equals_unsigned(seed in any::<u64>(), kind in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signed = TransformSpec::new(KINDS[kind], true);
        let inst = random_instance(&mut rng, 60, KernelShape::Flat, true, signed);
        let positive: Vec<TestResult> = inst.tests.iter().map(|r| TestResult { p: r.p, direction: Some(Direction::Positive) }).collect();
        let tests = MarkerTestTrack::new(positive).unwrap();
        let a = aggregate(&tests, &inst.positions, inst.kernel, signed).unwrap();
        // the signed Z uses the two-sided quantile, so only P and log coincide
        if KINDS[kind] != TransformKind::Z {
            let b = aggregate(&tests, &inst.positions, inst.kernel, TransformSpec::new(KINDS[kind], false)).unwrap();
            for j in 0..inst.positions.len() {
                if let (Some(x), Some(y)) = (a.get(j), b.get(j)) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn flat_constant_marker_on_equal_spacing_is_a_moving_average() {
    let positions: Vec<u64> = (0..40).map(|i| 1000 + 250 * i).collect();
    let t: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
    // k = 5 reaches two markers either side; an even k adds a tied marker
    for (k, half) in [(5usize, 2usize), (4, 2), (1, 0)] {
        let agg = Aggregator::new(
            &positions,
            KernelSpec::new(KernelShape::Flat, Bandwidth::Markers(k)),
        )
        .unwrap();
        let mut out = Vec::new();
        agg.aggregate_values(&t, &mut out);
        for j in 0..40 {
            if j < half || j + half >= 40 {
                assert!(out[j].is_nan(), "k {k} marker {j}");
            } else {
                let window = &t[j - half..=j + half];
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                assert!((out[j] - mean).abs() < 1e-12, "k {k} marker {j}");
            }
        }
    }
}

#[test]
fn constant_marker_and_constant_width_agree_on_equal_spacing() {
    let positions: Vec<u64> = (0..50).map(|i| 1500 * i).collect();
    let t: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
    for shape in SHAPES {
        let markers =
            Aggregator::new(&positions, KernelSpec::new(shape, Bandwidth::Markers(7))).unwrap();
        let h = match shape {
            KernelShape::Flat => 4500.0,
            KernelShape::Epanechnikov => 4501.0,
        };
        let width =
            Aggregator::new(&positions, KernelSpec::new(shape, Bandwidth::Width(h))).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        markers.aggregate_values(&t, &mut a);
        width.aggregate_values(&t, &mut b);
        for j in 0..50 {
            if shape == KernelShape::Flat {
                assert_eq!(a[j].is_nan(), b[j].is_nan(), "mask at marker {j}");
            }
            if a[j].is_nan() || b[j].is_nan() {
                continue;
            }
            assert!((a[j] - b[j]).abs() < 1e-12, "{shape} marker {j}");
        }
    }
}
