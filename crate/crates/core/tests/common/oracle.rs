//! Brute-force kernel aggregation, written independently of the library's
//! windowed implementation.

use cnvks_core::special::normal_quantile;
use cnvks_core::{
    Bandwidth, Direction, KernelShape, KernelSpec, TestResult, TransformKind, TransformSpec,
};
use rand::Rng;

pub struct Instance {
    pub positions: Vec<u64>,
    pub tests: Vec<TestResult>,
    pub kernel: KernelSpec,
    pub transform: TransformSpec,
}

pub const SHAPES: [KernelShape; 2] = [KernelShape::Flat, KernelShape::Epanechnikov];
pub const KINDS: [TransformKind; 3] = [TransformKind::P, TransformKind::Z, TransformKind::Log];

/// Random sorted positions, p-values and signs; coarse grids make distance
/// ties common.
pub fn random_instance(
    rng: &mut impl Rng,
    max_markers: usize,
    shape: KernelShape,
    by_markers: bool,
    transform: TransformSpec,
) -> Instance {
    let j = rng.random_range(2..=max_markers);
    let step = if rng.random_bool(0.5) { 100 } else { 1 };
    let mut positions: Vec<u64> = Vec::with_capacity(j);
    let mut at = rng.random_range(0..10_000u64) * step;
    for _ in 0..j {
        positions.push(at);
        at += rng.random_range(1..=4u64) * step * rng.random_range(1..=3u64);
    }
    let tests = (0..j)
        .map(|_| {
            let p = match rng.random_range(0..10) {
                0 => 1.0,
                1 => 10f64.powf(-rng.random_range(3.0..20.0)),
                _ => 1.0 - rng.random::<f64>(),
            };
            let direction = Some(if rng.random_bool(0.5) {
                Direction::Positive
            } else {
                Direction::Negative
            });
            TestResult { p, direction }
        })
        .collect();
    let span = (positions[j - 1] - positions[0]) as f64;
    let bandwidth = if by_markers {
        Bandwidth::Markers(rng.random_range(1..=j))
    } else {
        let h = if rng.random_bool(0.5) {
            (rng.random_range(1..=20u64) * step) as f64
        } else {
            rng.random_range(0.5..(span / 2.0).max(1.0))
        };
        Bandwidth::Width(h)
    };
    Instance {
        positions,
        tests,
        kernel: KernelSpec::new(shape, bandwidth),
        transform,
    }
}

pub fn oracle_transform(r: &TestResult, spec: TransformSpec) -> f64 {
    let s = r.direction.map_or(1.0, Direction::value);
    let p = r.p.max(1e-15);
    match (spec.kind, spec.signed) {
        (TransformKind::P, false) => 1.0 - r.p,
        (TransformKind::P, true) => s * (1.0 - r.p),
        (TransformKind::Z, false) => -normal_quantile(p.min(1.0 - 1e-15)),
        (TransformKind::Z, true) => -s * normal_quantile(p / 2.0),
        (TransformKind::Log, false) => -p.ln(),
        (TransformKind::Log, true) => -s * p.ln(),
    }
}

/// Weighted mean at every target, `None` where the kernel reaches past the
/// first or last marker.
pub fn brute_force(inst: &Instance) -> Vec<Option<f64>> {
    let pos = &inst.positions;
    let first = pos[0] as f64;
    let last = pos[pos.len() - 1] as f64;
    let t: Vec<f64> = inst
        .tests
        .iter()
        .map(|r| oracle_transform(r, inst.transform))
        .collect();
    pos.iter()
        .map(|&target| {
            let l0 = target as f64;
            let (reach, h) = match inst.kernel.bandwidth {
                Bandwidth::Width(h) => (h, h),
                Bandwidth::Markers(k) => {
                    let mut d: Vec<f64> = pos.iter().map(|&p| (p as f64 - l0).abs()).collect();
                    d.sort_by(f64::total_cmp);
                    let dk = d[k - 1];
                    match inst.kernel.shape {
                        KernelShape::Flat => (dk, dk),
                        KernelShape::Epanechnikov => (dk, dk + 1.0),
                    }
                }
            };
            if l0 - reach < first || l0 + reach > last {
                return None;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, &p) in pos.iter().enumerate() {
                let dist = (p as f64 - l0).abs();
                if dist > h {
                    continue;
                }
                let w = match inst.kernel.shape {
                    KernelShape::Flat => 1.0,
                    KernelShape::Epanechnikov => {
                        let u = if h > 0.0 { dist / h } else { 0.0 };
                        0.75 * (1.0 - u * u)
                    }
                };
                num += w * t[j];
                den += w;
            }
            Some(num / den)
        })
        .collect()
}
