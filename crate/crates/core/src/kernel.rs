//! Kernel aggregation of transformed marker-level results.
//!
//! For a target marker at `ℓ₀` the aggregate is the kernel-weighted mean
//! `T(ℓ₀) = Σ t_j K(ℓ_j, ℓ₀) / Σ K(ℓ_j, ℓ₀)` of transformed test results
//! `t_j`. Targets are marker positions only, and a target is masked when its
//! bandwidth reaches past either end of the track.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::marker_tests::{MarkerTestTrack, TestResult};
use crate::special::normal_quantile;

/// Lower clamp applied to p-values before the z and log transforms.
pub const P_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelShape {
    Flat,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Constant width: half-width `h` in base pairs.
    Width(f64),
    /// Constant marker: the `k` nearest markers.
    Markers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, bandwidth: Bandwidth) -> Self {
        KernelSpec { shape, bandwidth }
    }

    pub fn validate(&self, n_markers: usize) -> Result<()> {
        match self.bandwidth {
            Bandwidth::Width(h) if !(h.is_finite() && h > 0.0) => Err(Error::InvalidKernel(
                format!("bandwidth must be a positive number of base pairs, got {h}"),
            )),
            Bandwidth::Markers(0) => Err(Error::InvalidKernel(
                "bandwidth must cover at least one marker".into(),
            )),
            Bandwidth::Markers(k) if k > n_markers => Err(Error::KTooLarge {
                k,
                markers: n_markers,
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    P,
    Z,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub signed: bool,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, signed: bool) -> Self {
        TransformSpec { kind, signed }
    }

    /// Maps `(p, s)` to `t`; `sign` is ignored for unsigned transforms.
    #[inline]
    pub fn apply(&self, p: f64, sign: f64) -> f64 {
        match (self.kind, self.signed) {
            (TransformKind::P, false) => 1.0 - p,
            (TransformKind::P, true) => sign * (1.0 - p),
            // Φ⁻¹(1 - p) = -Φ⁻¹(p)
            (TransformKind::Z, false) => -normal_quantile(p.clamp(P_FLOOR, 1.0 - P_FLOOR)),
            // Φ⁻¹((1 + s(1 - p)) / 2) = -s Φ⁻¹(p / 2)
            (TransformKind::Z, true) => -sign * normal_quantile(p.clamp(P_FLOOR, 1.0) / 2.0),
            (TransformKind::Log, false) => -p.clamp(P_FLOOR, 1.0).ln(),
            (TransformKind::Log, true) => -sign * p.clamp(P_FLOOR, 1.0).ln(),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformKind::P => "p",
            TransformKind::Z => "z",
            TransformKind::Log => "log",
        })
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(TransformKind::P),
            "z" => Ok(TransformKind::Z),
            "log" => Ok(TransformKind::Log),
            other => Err(Error::InvalidKernel(format!("unknown transform {other:?}"))),
        }
    }
}

impl std::str::FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(KernelShape::Flat),
            "epanechnikov" => Ok(KernelShape::Epanechnikov),
            other => Err(Error::InvalidKernel(format!("unknown kernel {other:?}"))),
        }
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelShape::Flat => "flat",
            KernelShape::Epanechnikov => "epanechnikov",
        })
    }
}

pub fn transform(result: &TestResult, spec: TransformSpec) -> Result<f64> {
    let sign = match (spec.signed, result.direction) {
        (true, Some(d)) => d.value(),
        (true, None) => return Err(Error::MissingSign),
        (false, _) => 1.0,
    };
    Ok(spec.apply(result.p, sign))
}

pub fn transform_track(tests: &MarkerTestTrack, spec: TransformSpec) -> Result<Vec<f64>> {
    tests.results().iter().map(|r| transform(r, spec)).collect()
}

/// Kernel weight of a marker at `lj` for the target `l0`; the support is
/// closed, `|lj - l0| <= h`.
#[inline]
pub fn kernel_weight(lj: f64, l0: f64, h: f64, shape: KernelShape) -> f64 {
    let d = (lj - l0).abs();
    if d > h {
        return 0.0;
    }
    match shape {
        KernelShape::Flat => 1.0,
        KernelShape::Epanechnikov => {
            let u = d / h;
            0.75 * (1.0 - u * u)
        }
    }
}

/// The `k`-nearest support of a target position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    /// Distance to the `k`-th closest marker.
    pub h: f64,
    /// First marker index in the support.
    pub start: usize,
    /// One past the last marker index.
    pub end: usize,
}

impl Support {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Bandwidth reaching the `k`-th closest marker to `target`.
///
/// Markers tied with the `k`-th at the same distance all join the support,
/// so it can hold more than `k` markers. `positions` must be sorted.
pub fn adaptive_bandwidth(positions: &[u64], target: u64, k: usize) -> Result<Support> {
    if k == 0 || k > positions.len() {
        return Err(Error::KTooLarge {
            k,
            markers: positions.len(),
        });
    }
    let dist = |i: usize| positions[i].abs_diff(target);
    // right: first index at or beyond the target; left: one past the last below
    let mut right = positions.partition_point(|&p| p < target);
    let mut left = right;
    let mut kth = 0;
    for _ in 0..k {
        let take_left = match (left > 0, right < positions.len()) {
            (true, true) => dist(left - 1) <= dist(right),
            (true, false) => true,
            (false, _) => false,
        };
        if take_left {
            left -= 1;
            kth = dist(left);
        } else {
            kth = dist(right);
            right += 1;
        }
    }
    while left > 0 && dist(left - 1) <= kth {
        left -= 1;
    }
    while right < positions.len() && dist(right) <= kth {
        right += 1;
    }
    Ok(Support {
        h: kth as f64,
        start: left,
        end: right,
    })
}

#[derive(Debug, Clone)]
struct Window {
    start: usize,
    weights: Vec<f64>,
    total: f64,
}

/// Precomputed kernel windows for every target marker of a track.
#[derive(Debug, Clone)]
pub struct Aggregator {
    spec: KernelSpec,
    positions: Vec<u64>,
    windows: Vec<Option<Window>>,
}

impl Aggregator {
    pub fn new(positions: &[u64], spec: KernelSpec) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("track has no markers".into()));
        }
        spec.validate(positions.len())?;
        let first = positions[0] as f64;
        let last = positions[positions.len() - 1] as f64;

        let mut windows = Vec::with_capacity(positions.len());
        for &target in positions {
            let l0 = target as f64;
            let (reach, h, start, end) = match spec.bandwidth {
                Bandwidth::Width(h) => {
                    let start = positions.partition_point(|&p| (p as f64) < l0 - h);
                    let end = positions.partition_point(|&p| (p as f64) <= l0 + h);
                    (h, h, start, end)
                }
                Bandwidth::Markers(k) => {
                    let s = adaptive_bandwidth(positions, target, k)?;
                    // Epanechnikov would give the k-th marker zero weight at h itself
                    let h = match spec.shape {
                        KernelShape::Flat => s.h,
                        KernelShape::Epanechnikov => s.h + 1.0,
                    };
                    (s.h, h, s.start, s.end)
                }
            };
            if l0 - reach < first || l0 + reach > last {
                windows.push(None);
                continue;
            }
            let weights: Vec<f64> = positions[start..end]
                .iter()
                .map(|&p| kernel_weight(p as f64, l0, h, spec.shape))
                .collect();
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::EmptySupport { position: target });
            }
            windows.push(Some(Window {
                start,
                weights,
                total,
            }));
        }
        Ok(Aggregator {
            spec,
            positions: positions.to_vec(),
            windows,
        })
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn n_markers(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        self.windows.iter().map(Option::is_some).collect()
    }

    pub fn n_valid(&self) -> usize {
        self.windows.iter().filter(|w| w.is_some()).count()
    }

    /// Marker indices receiving weight at target `j`, with their weights.
    pub fn weights(&self, j: usize) -> Option<(usize, &[f64])> {
        self.windows[j]
            .as_ref()
            .map(|w| (w.start, w.weights.as_slice()))
    }

    #[inline]
    fn value_at(w: &Window, t: &[f64]) -> f64 {
        let num: f64 = w
            .weights
            .iter()
            .zip(&t[w.start..w.start + w.weights.len()])
            .map(|(k, v)| k * v)
            .sum();
        num / w.total
    }

    /// Aggregates transformed values; masked targets get `NaN`.
    pub fn aggregate_values(&self, t: &[f64], out: &mut Vec<f64>) {
        assert_eq!(t.len(), self.positions.len());
        out.clear();
        out.extend(self.windows.iter().map(|w| match w {
            Some(w) => Self::value_at(w, t),
            None => f64::NAN,
        }));
    }

    /// `max_j T_j` (or `max_j |T_j|` when `signed`) over valid targets.
    pub fn max_stat(&self, t: &[f64], signed: bool) -> Option<f64> {
        assert_eq!(t.len(), self.positions.len());
        let mut best: Option<f64> = None;
        for w in self.windows.iter().flatten() {
            let v = Self::value_at(w, t);
            let v = if signed { v.abs() } else { v };
            best = Some(match best {
                Some(b) if b >= v => b,
                _ => v,
            });
        }
        best
    }
}

/// Aggregates along the track with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationProfile {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub positions: Vec<u64>,
    pub kernel: KernelSpec,
    pub transform: TransformSpec,
}

impl AggregationProfile {
    pub fn from_transformed(aggregator: &Aggregator, t: &[f64], transform: TransformSpec) -> Self {
        let mut values = Vec::with_capacity(t.len());
        aggregator.aggregate_values(t, &mut values);
        AggregationProfile {
            values,
            valid: aggregator.valid_mask(),
            positions: aggregator.positions().to_vec(),
            kernel: aggregator.spec(),
            transform,
        }
    }

    /// Aggregate at marker `j`, `None` if masked.
    pub fn get(&self, j: usize) -> Option<f64> {
        self.valid[j].then(|| self.values[j])
    }
}

pub fn aggregate(
    tests: &MarkerTestTrack,
    positions: &[u64],
    kernel: KernelSpec,
    transform: TransformSpec,
) -> Result<AggregationProfile> {
    assert_eq!(
        tests.len(),
        positions.len(),
        "tests and track are misaligned"
    );
    let aggregator = Aggregator::new(positions, kernel)?;
    let t = transform_track(tests, transform)?;
    Ok(AggregationProfile::from_transformed(
        &aggregator,
        &t,
        transform,
    ))
}

pub fn t_max(profile: &AggregationProfile, signed: bool) -> Result<f64> {
    profile
        .values
        .iter()
        .zip(&profile.valid)
        .filter(|(_, &ok)| ok)
        .map(|(&v, _)| if signed { v.abs() } else { v })
        .reduce(f64::max)
        .ok_or(Error::AllMasked)
}

/// `position  T  valid`, with `NA` for masked aggregates.
pub fn write_profile(profile: &AggregationProfile, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "position\tT\tvalid")?;
    for j in 0..profile.positions.len() {
        match profile.get(j) {
            Some(v) => writeln!(out, "{}\t{}\t1", profile.positions[j], v)?,
            None => writeln!(out, "{}\tNA\t0", profile.positions[j])?,
        }
    }
    Ok(())
}
