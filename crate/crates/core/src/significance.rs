//! Null distributions of the maximum aggregate and the resulting global
//! p-values and marker-level thresholds.
//!
//! The permutation null re-runs every marker test against permuted
//! phenotypes while the intensity matrix stays fixed, so correlation between
//! markers is carried into the null. The Monte Carlo null treats marker
//! p-values as independent uniforms; it is only valid when markers are
//! independent and is kept as a diagnostic comparator.
//!
//! Draw `b` of either null comes from the random stream `(seed, b)`, so the
//! draw vector does not depend on thread count or scheduling.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{AggregationProfile, Aggregator, KernelSpec, TransformSpec};
use crate::marker_tests::{MarkerTestTrack, MarkerTester, TestResult};
use crate::rng;
use crate::track::{MarkerTrack, Phenotype};

/// Largest subject count accepted for exhaustive enumeration (8! = 40320).
pub const MAX_EXHAUSTIVE: usize = 8;

/// Permutation count used when the caller does not choose one.
pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NullMethod {
    Permutation,
    MonteCarlo,
}

impl std::fmt::Display for NullMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NullMethod::Permutation => "permutation",
            NullMethod::MonteCarlo => "monte_carlo",
        })
    }
}

/// How permutation draws are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permutations {
    /// `count` i.i.d. uniform permutations (repeats possible).
    Random(usize),
    /// Every one of the `n!` permutations exactly once, in lexicographic order.
    Exhaustive,
}

/// Sorted draws of the maximum aggregate under the null.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    draws: Vec<f64>,
    method: NullMethod,
    seed: u64,
}

impl NullDistribution {
    pub fn new(mut draws: Vec<f64>, method: NullMethod, seed: u64) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidB);
        }
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::Empty(
                "null distribution has non-finite draws".into(),
            ));
        }
        draws.sort_by(f64::total_cmp);
        Ok(NullDistribution {
            draws,
            method,
            seed,
        })
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn method(&self) -> NullMethod {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Empirical CDF `F̂₀(x)`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.draws.partition_point(|&d| d <= x) as f64 / self.len() as f64
    }

    /// Number of draws at or above `x`.
    pub fn count_at_least(&self, x: f64) -> usize {
        self.len() - self.draws.partition_point(|&d| d < x)
    }
}

/// Add-one global p-value `(1 + #{b : T_max^(b) >= t_max}) / (B + 1)`.
pub fn global_p(t_max: f64, null: &NullDistribution) -> f64 {
    (1 + null.count_at_least(t_max)) as f64 / (null.len() + 1) as f64
}

/// The `(1 - α)` null quantile: the draw of rank `⌈(1 - α)(B + 1)⌉`,
/// clipped to `[1, B]`.
pub fn threshold(null: &NullDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let b = null.len();
    let raw = ((1.0 - alpha) * (b + 1) as f64 - 1e-9).ceil();
    let rank = (raw.max(1.0) as usize).min(b);
    Ok(null.draws[rank - 1])
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Lexicographic rank-`index` permutation of `0..n`.
fn unrank_permutation(mut index: usize, n: usize, out: &mut Vec<u32>) {
    let mut pool: Vec<u32> = (0..n as u32).collect();
    let mut fact: usize = (1..n).product();
    out.clear();
    for remaining in (1..=n).rev() {
        let pick = index / fact;
        index %= fact;
        out.push(pool.remove(pick));
        if remaining > 1 {
            fact /= remaining - 1;
        }
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// One kernel/transform/null combination evaluated on shared marker tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method {
    pub kernel: KernelSpec,
    pub transform: TransformSpec,
    pub null: NullMethod,
}

impl Method {
    pub fn permutation(kernel: KernelSpec, transform: TransformSpec) -> Self {
        Method {
            kernel,
            transform,
            null: NullMethod::Permutation,
        }
    }

    pub fn monte_carlo(kernel: KernelSpec, transform: TransformSpec) -> Self {
        Method {
            kernel,
            transform,
            null: NullMethod::MonteCarlo,
        }
    }
}

struct Scratch {
    perm: Vec<u32>,
    outcome: Vec<f64>,
    tests: Vec<TestResult>,
    t: Vec<f64>,
}

fn transformed_into(tests: &[TestResult], spec: TransformSpec, out: &mut Vec<f64>) {
    out.clear();
    out.extend(tests.iter().map(|r| {
        let sign = r.direction.map_or(1.0, |d| d.value());
        spec.apply(r.p, sign)
    }));
}

/// Permutation nulls for several methods sharing one set of permutations.
///
/// Returns one distribution per entry of `methods`, in order. Each draw is
/// identical to what a single-method call with the same seed would produce.
pub fn permutation_nulls(
    tester: &MarkerTester,
    methods: &[(&Aggregator, TransformSpec)],
    permutations: Permutations,
    seed: u64,
) -> Result<Vec<NullDistribution>> {
    let n = tester.n_subjects();
    let count = match permutations {
        Permutations::Random(0) => return Err(Error::InvalidB),
        Permutations::Random(b) => b,
        Permutations::Exhaustive if n > MAX_EXHAUSTIVE => {
            return Err(Error::TooManyForExhaustive {
                n,
                max: MAX_EXHAUSTIVE,
            })
        }
        Permutations::Exhaustive => factorial(n),
    };
    if methods.iter().any(|(agg, _)| agg.n_valid() == 0) {
        return Err(Error::AllMasked);
    }

    let per_draw: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map_init(
            || Scratch {
                perm: Vec::with_capacity(n),
                outcome: Vec::with_capacity(n),
                tests: Vec::with_capacity(tester.n_markers()),
                t: Vec::with_capacity(tester.n_markers()),
            },
            |s, b| {
                match permutations {
                    Permutations::Random(_) => {
                        s.perm.clear();
                        s.perm.extend(0..n as u32);
                        s.perm.shuffle(&mut rng::stream(seed, b as u64));
                    }
                    Permutations::Exhaustive => unrank_permutation(b, n, &mut s.perm),
                }
                tester.permute_outcome(&s.perm, &mut s.outcome);
                tester.evaluate(&s.outcome, &mut s.tests);
                methods
                    .iter()
                    .map(|(agg, spec)| {
                        transformed_into(&s.tests, *spec, &mut s.t);
                        agg.max_stat(&s.t, spec.signed).expect("checked nonempty")
                    })
                    .collect()
            },
        )
        .collect();

    (0..methods.len())
        .map(|m| {
            let draws = per_draw.iter().map(|d| d[m]).collect();
            NullDistribution::new(draws, NullMethod::Permutation, seed)
        })
        .collect()
}

/// Permutation null of the maximum aggregate for one method.
pub fn permutation_null(
    track: &MarkerTrack,
    phen: &Phenotype,
    kernel: KernelSpec,
    transform: TransformSpec,
    permutations: Permutations,
    seed: u64,
) -> Result<NullDistribution> {
    let tester = MarkerTester::new(track, phen)?;
    let agg = Aggregator::new(track.positions(), kernel)?;
    Ok(permutation_nulls(&tester, &[(&agg, transform)], permutations, seed)?.remove(0))
}

/// Null of the maximum aggregate when marker p-values are i.i.d. uniform
/// (directions ±1 with equal probability for signed transforms), aggregated
/// over the real marker geometry.
pub fn monte_carlo_null(
    aggregator: &Aggregator,
    transform: TransformSpec,
    draws: usize,
    seed: u64,
) -> Result<NullDistribution> {
    if draws == 0 {
        return Err(Error::InvalidB);
    }
    if aggregator.n_valid() == 0 {
        return Err(Error::AllMasked);
    }
    let j = aggregator.n_markers();
    let values: Vec<f64> = (0..draws)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(j),
            |t, b| {
                let mut rng = rng::stream(seed, b as u64);
                t.clear();
                for _ in 0..j {
                    let p: f64 = rng.random();
                    let sign = if transform.signed && rng.random::<bool>() {
                        -1.0
                    } else {
                        1.0
                    };
                    t.push(transform.apply(p, sign));
                }
                aggregator
                    .max_stat(t, transform.signed)
                    .expect("checked nonempty")
            },
        )
        .collect();
    NullDistribution::new(values, NullMethod::MonteCarlo, seed)
}

/// Label mixed into the scan seed for the Monte Carlo stream.
fn monte_carlo_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, rng::label("monte-carlo"))
}

/// Settings shared by every method of one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub permutations: Permutations,
    pub alpha: f64,
    pub seed: u64,
}

impl ScanSettings {
    pub fn new(permutations: usize, alpha: f64, seed: u64) -> Self {
        ScanSettings {
            permutations: Permutations::Random(permutations),
            alpha,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub profile: AggregationProfile,
    pub t_max: f64,
    pub global_p: f64,
    pub threshold: f64,
    /// Valid markers whose aggregate (absolute value if signed) exceeds the threshold.
    pub significant: Vec<usize>,
    pub alpha: f64,
    pub null: NullDistribution,
}

impl ScanResult {
    pub fn rejected(&self) -> bool {
        self.global_p <= self.alpha
    }

    fn assemble(profile: AggregationProfile, null: NullDistribution, alpha: f64) -> Result<Self> {
        let signed = profile.transform.signed;
        let t_max = crate::kernel::t_max(&profile, signed)?;
        let threshold = threshold(&null, alpha)?;
        let significant = (0..profile.values.len())
            .filter(|&j| {
                profile
                    .get(j)
                    .is_some_and(|v| (if signed { v.abs() } else { v }) > threshold)
            })
            .collect();
        Ok(ScanResult {
            global_p: global_p(t_max, &null),
            profile,
            t_max,
            threshold,
            significant,
            alpha,
            null,
        })
    }
}

/// Observed marker tests plus one scan result per requested method.
#[derive(Debug, Clone)]
pub struct MultiScan {
    pub tests: MarkerTestTrack,
    pub results: Vec<ScanResult>,
}

/// Scans one dataset with several methods.
///
/// Permutation methods share one set of permutations drawn from streams
/// `(seed, b)`; Monte Carlo methods draw from a seed derived from `seed`.
/// Each result equals what scanning with that method alone would give.
pub fn scan_methods(
    track: &MarkerTrack,
    phen: &Phenotype,
    methods: &[Method],
    settings: ScanSettings,
) -> Result<MultiScan> {
    check_alpha(settings.alpha)?;
    if matches!(settings.permutations, Permutations::Random(0)) {
        return Err(Error::InvalidB);
    }
    let tester = MarkerTester::new(track, phen)?;
    let tests = tester.observed();
    let aggregators: Vec<Aggregator> = methods
        .iter()
        .map(|m| Aggregator::new(track.positions(), m.kernel))
        .collect::<Result<_>>()?;
    if aggregators.iter().any(|a| a.n_valid() == 0) {
        return Err(Error::AllMasked);
    }

    let perm_idx: Vec<usize> = (0..methods.len())
        .filter(|&i| methods[i].null == NullMethod::Permutation)
        .collect();
    let pairs: Vec<(&Aggregator, TransformSpec)> = perm_idx
        .iter()
        .map(|&i| (&aggregators[i], methods[i].transform))
        .collect();
    let mut perm_nulls = if pairs.is_empty() {
        Vec::new()
    } else {
        permutation_nulls(&tester, &pairs, settings.permutations, settings.seed)?
    }
    .into_iter();

    let draws = match settings.permutations {
        Permutations::Random(b) => b,
        Permutations::Exhaustive => factorial(track.n_subjects()),
    };
    let mut results = Vec::with_capacity(methods.len());
    for (m, agg) in methods.iter().zip(&aggregators) {
        let t = crate::kernel::transform_track(&tests, m.transform)?;
        let profile = AggregationProfile::from_transformed(agg, &t, m.transform);
        let null = match m.null {
            NullMethod::Permutation => perm_nulls.next().expect("one null per permutation method"),
            NullMethod::MonteCarlo => {
                monte_carlo_null(agg, m.transform, draws, monte_carlo_seed(settings.seed))?
            }
        };
        results.push(ScanResult::assemble(profile, null, settings.alpha)?);
    }
    Ok(MultiScan { tests, results })
}

/// Observed profile, permutation null, global p-value and significant markers.
pub fn scan(
    track: &MarkerTrack,
    phen: &Phenotype,
    kernel: KernelSpec,
    transform: TransformSpec,
    settings: ScanSettings,
) -> Result<(MarkerTestTrack, ScanResult)> {
    let mut multi = scan_methods(
        track,
        phen,
        &[Method::permutation(kernel, transform)],
        settings,
    )?;
    Ok((multi.tests, multi.results.remove(0)))
}

/// Profile with the threshold and per-marker significance flags.
pub fn write_scan_profile(result: &ScanResult, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "position\tT\tvalid\tthreshold\tsignificant")?;
    let profile = &result.profile;
    let mut sig = result.significant.iter().peekable();
    for j in 0..profile.positions.len() {
        let flag = if sig.peek() == Some(&&j) {
            sig.next();
            1
        } else {
            0
        };
        match profile.get(j) {
            Some(v) => writeln!(
                out,
                "{}\t{}\t1\t{}\t{}",
                profile.positions[j], v, result.threshold, flag
            )?,
            None => writeln!(
                out,
                "{}\tNA\t0\t{}\t0",
                profile.positions[j], result.threshold
            )?,
        }
    }
    Ok(())
}

/// One draw per line after a `#` header naming method, B and seed.
pub fn write_null(null: &NullDistribution, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "# method={} B={} seed={}",
        null.method(),
        null.len(),
        null.seed()
    )?;
    for d in null.draws() {
        writeln!(out, "{d}")?;
    }
    Ok(())
}
