use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::{build_dataset, phenotype_name, SimScenario};
use crate::error::{Error, Result};
use crate::kernel::{Aggregator, Bandwidth, KernelShape, KernelSpec, TransformSpec};
use crate::rng;
use crate::significance::{scan_methods, Method, NullMethod, Permutations, ScanSettings};

/// Bandwidth of a simulated method, possibly tied to the true CNV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthSetting {
    /// A fixed number of nearest markers.
    Markers(usize),
    /// A fixed half-width in base pairs.
    BasePairs(f64),
    /// As many markers as the CNV covers.
    MatchedMarkers,
    /// Half the CNV's extent in base pairs.
    MatchedBasePairs,
}

impl BandwidthSetting {
    /// `"markers"` for constant-marker settings, `"bp"` for constant-width ones.
    pub fn mode(&self) -> &'static str {
        match self {
            BandwidthSetting::Markers(_) | BandwidthSetting::MatchedMarkers => "markers",
            BandwidthSetting::BasePairs(_) | BandwidthSetting::MatchedBasePairs => "bp",
        }
    }

    /// The size part of the setting: a number or `matched`.
    pub fn size(&self) -> String {
        match self {
            BandwidthSetting::Markers(k) => k.to_string(),
            BandwidthSetting::BasePairs(h) => h.to_string(),
            BandwidthSetting::MatchedMarkers | BandwidthSetting::MatchedBasePairs => {
                "matched".into()
            }
        }
    }

    /// Concrete bandwidth for a dataset with the given positions and CNV.
    pub fn resolve(&self, positions: &[u64], cnv: &std::ops::Range<usize>) -> Bandwidth {
        match *self {
            BandwidthSetting::Markers(k) => Bandwidth::Markers(k),
            BandwidthSetting::BasePairs(h) => Bandwidth::Width(h),
            BandwidthSetting::MatchedMarkers => Bandwidth::Markers(cnv.len()),
            BandwidthSetting::MatchedBasePairs => {
                let extent = positions[cnv.end - 1] - positions[cnv.start];
                Bandwidth::Width((extent as f64 / 2.0).max(1.0))
            }
        }
    }
}

impl fmt::Display for BandwidthSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.mode(), self.size())
    }
}

/// A kernel method applied to simulated data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub shape: KernelShape,
    pub bandwidth: BandwidthSetting,
    pub transform: TransformSpec,
    pub null: NullMethod,
}

impl MethodConfig {
    fn resolve(&self, positions: &[u64], cnv: &std::ops::Range<usize>) -> Method {
        Method {
            kernel: KernelSpec::new(self.shape, self.bandwidth.resolve(positions, cnv)),
            transform: self.transform,
            null: self.null,
        }
    }
}

/// Settings shared by every trial of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub permutations: Permutations,
    pub alpha: f64,
}

/// Result of one method on one simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub rejected: bool,
    pub global_p: f64,
    pub t_max: f64,
}

/// Builds the dataset for `seed` and scans it with every method.
///
/// Permutation methods share their permutations, and every method sees the
/// same dataset. The outcome of a method does not depend on which other
/// methods are run alongside it. A method that cannot be applied to the
/// dataset (too large a bandwidth, say) yields an error in its slot only.
pub fn run_trials(
    scenario: &SimScenario,
    methods: &[MethodConfig],
    settings: TrialSettings,
    seed: u64,
) -> Result<Vec<Result<TrialOutcome>>> {
    let data = build_dataset(scenario, rng::derive_seed(seed, rng::label("dataset")))?;
    let positions = data.track.positions();
    let resolved: Vec<Method> = methods
        .iter()
        .map(|m| m.resolve(positions, &data.cnv))
        .collect();
    let usable: Vec<Result<()>> = resolved
        .iter()
        .map(|m| {
            let agg = Aggregator::new(positions, m.kernel)?;
            if agg.n_valid() == 0 {
                return Err(Error::AllMasked);
            }
            Ok(())
        })
        .collect();
    let runnable: Vec<Method> = resolved
        .iter()
        .zip(&usable)
        .filter(|(_, ok)| ok.is_ok())
        .map(|(m, _)| *m)
        .collect();
    let scan_seed = rng::derive_seed(seed, rng::label("permutation"));
    let mut results = if runnable.is_empty() {
        Vec::new()
    } else {
        let settings = ScanSettings {
            permutations: settings.permutations,
            alpha: settings.alpha,
            seed: scan_seed,
        };
        scan_methods(&data.track, &data.phen, &runnable, settings)?.results
    }
    .into_iter();
    Ok(usable
        .into_iter()
        .map(|ok| {
            ok.map(|()| {
                let r = results.next().expect("one result per runnable method");
                TrialOutcome {
                    rejected: r.rejected(),
                    global_p: r.global_p,
                    t_max: r.t_max,
                }
            })
        })
        .collect())
}

/// Builds the dataset for `seed` and scans it with one method.
pub fn run_trial(
    scenario: &SimScenario,
    method: &MethodConfig,
    settings: TrialSettings,
    seed: u64,
) -> Result<TrialOutcome> {
    run_trials(scenario, std::slice::from_ref(method), settings, seed)?.remove(0)
}

/// Scenarios crossed with methods, each cell replicated.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub scenarios: Vec<SimScenario>,
    pub methods: Vec<MethodConfig>,
    pub replicates: usize,
    pub settings: TrialSettings,
    pub seed: u64,
}

impl PowerGrid {
    /// Seed of replicate `r` of a scenario; the same for every method.
    pub fn trial_seed(&self, scenario: &SimScenario, replicate: usize) -> u64 {
        let cell = rng::derive_seed(self.seed, rng::label(&scenario.key()));
        rng::derive_seed(cell, replicate as u64)
    }
}

/// Rejection counts for one scenario and method.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCell {
    pub scenario: SimScenario,
    pub method: MethodConfig,
    /// Global p-values of the successful replicates, in replicate order.
    pub global_p: Vec<f64>,
    pub rejections: usize,
    pub failed: usize,
    /// First error met in this cell.
    pub error: Option<String>,
}

impl PowerCell {
    /// Successful replicates.
    pub fn replicates(&self) -> usize {
        self.global_p.len()
    }

    /// Rejection rate; `NaN` with no successful replicates.
    pub fn power(&self) -> f64 {
        self.rejections as f64 / self.replicates() as f64
    }

    /// Binomial standard error; `None` with fewer than two replicates.
    pub fn se(&self) -> Option<f64> {
        let r = self.replicates();
        if r < 2 {
            return None;
        }
        let p = self.power();
        Some((p * (1.0 - p) / r as f64).sqrt())
    }
}

/// One cell per scenario and method, scenario-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub cells: Vec<PowerCell>,
    pub n_methods: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => "NA".into(),
    }
}

impl PowerTable {
    pub fn cell(&self, scenario: usize, method: usize) -> &PowerCell {
        &self.cells[scenario * self.n_methods + method]
    }

    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "n\tmarkers\tcnv_size\tcnv_start\tfrequency\tsnr\teffect\tphenotype\tnoise\tspacing\ttransform\tsigned\tkernel\tbandwidth_mode\tbandwidth\tnull\tpower\tse\treplicates\tfailed"
        )?;
        for c in &self.cells {
            let s = &c.scenario;
            let m = &c.method;
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.n,
                s.markers,
                s.cnv_size,
                s.cnv_span().start,
                s.frequency,
                s.snr,
                s.effect,
                phenotype_name(s.phenotype),
                s.noise,
                s.spacing,
                m.transform.kind,
                m.transform.signed,
                m.shape,
                m.bandwidth.mode(),
                m.bandwidth.size(),
                m.null,
                fmt_opt(Some(c.power())),
                fmt_opt(c.se()),
                c.replicates(),
                c.failed,
            )?;
        }
        Ok(())
    }
}

/// Runs every replicate of every scenario with all methods.
pub fn power_study(grid: &PowerGrid) -> Result<PowerTable> {
    power_study_with_progress(grid, |_, _| {})
}

/// As [`power_study`], calling `progress(done, total)` after each trial.
///
/// Errors inside a trial are recorded in the affected cells and do not stop
/// the study.
pub fn power_study_with_progress(
    grid: &PowerGrid,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<PowerTable> {
    if grid.scenarios.is_empty() || grid.methods.is_empty() {
        return Err(Error::InvalidScenario("the grid has no cells".into()));
    }
    if grid.replicates == 0 {
        return Err(Error::InvalidScenario("replicates must be positive".into()));
    }
    if !(grid.settings.alpha > 0.0 && grid.settings.alpha < 1.0) {
        return Err(Error::InvalidAlpha(grid.settings.alpha));
    }
    if matches!(grid.settings.permutations, Permutations::Random(0)) {
        return Err(Error::InvalidB);
    }
    let n_methods = grid.methods.len();
    let total = grid.scenarios.len() * grid.replicates;
    let done = AtomicUsize::new(0);
    let trials: Vec<Vec<Result<TrialOutcome>>> = (0..total)
        .into_par_iter()
        .map(|t| {
            let scenario = &grid.scenarios[t / grid.replicates];
            let seed = grid.trial_seed(scenario, t % grid.replicates);
            let out = match run_trials(scenario, &grid.methods, grid.settings, seed) {
                Ok(v) => v,
                Err(e) => {
                    let msg = e.to_string();
                    (0..n_methods)
                        .map(|_| Err(Error::InvalidScenario(msg.clone())))
                        .collect()
                }
            };
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            out
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.scenarios.len() * n_methods);
    for (s, scenario) in grid.scenarios.iter().enumerate() {
        for (m, method) in grid.methods.iter().enumerate() {
            let mut cell = PowerCell {
                scenario: scenario.clone(),
                method: *method,
                global_p: Vec::with_capacity(grid.replicates),
                rejections: 0,
                failed: 0,
                error: None,
            };
            for trial in &trials[s * grid.replicates..(s + 1) * grid.replicates] {
                match &trial[m] {
                    Ok(o) => {
                        cell.global_p.push(o.global_p);
                        cell.rejections += usize::from(o.rejected);
                    }
                    Err(e) => {
                        cell.failed += 1;
                        cell.error.get_or_insert_with(|| match e {
                            Error::InvalidScenario(msg) => msg.clone(),
                            other => other.to_string(),
                        });
                    }
                }
            }
            cells.push(cell);
        }
    }
    Ok(PowerTable { cells, n_methods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TransformKind;

    fn method(null: NullMethod) -> MethodConfig {
        MethodConfig {
            shape: KernelShape::Flat,
            bandwidth: BandwidthSetting::MatchedMarkers,
            transform: TransformSpec::new(TransformKind::Z, true),
            null,
        }
    }

    fn small(frequency: f64, n: usize) -> SimScenario {
        SimScenario {
            n,
            markers: 60,
            cnv_size: 10,
            frequency,
            ..SimScenario::default()
        }
    }

    fn settings() -> TrialSettings {
        TrialSettings {
            permutations: Permutations::Random(99),
            alpha: 0.05,
        }
    }

    #[test]
    fn trials_are_reproducible_and_independent_of_companions() {
        let s = small(0.1, 200);
        let a = run_trial(&s, &method(NullMethod::Permutation), settings(), 5).unwrap();
        let b = run_trial(&s, &method(NullMethod::Permutation), settings(), 5).unwrap();
        assert_eq!(a, b);
        let both = run_trials(
            &s,
            &[
                method(NullMethod::MonteCarlo),
                method(NullMethod::Permutation),
            ],
            settings(),
            5,
        )
        .unwrap();
        assert_eq!(*both[1].as_ref().unwrap(), a);
    }

    #[test]
    fn unusable_method_fails_alone() {
        let s = small(0.1, 100);
        let mut bad = method(NullMethod::Permutation);
        bad.bandwidth = BandwidthSetting::Markers(500);
        let out = run_trials(&s, &[bad, method(NullMethod::Permutation)], settings(), 1).unwrap();
        assert!(matches!(out[0], Err(Error::KTooLarge { .. })));
        assert!(out[1].is_ok());
    }

    #[test]
    fn matched_bandwidths() {
        let pos: Vec<u64> = (0..20).map(|j| j * 100).collect();
        let cnv = 5..11;
        assert_eq!(
            BandwidthSetting::MatchedMarkers.resolve(&pos, &cnv),
            Bandwidth::Markers(6)
        );
        assert_eq!(
            BandwidthSetting::MatchedBasePairs.resolve(&pos, &cnv),
            Bandwidth::Width(250.0)
        );
        assert_eq!(BandwidthSetting::MatchedBasePairs.to_string(), "bp:matched");
    }

    #[test]
    fn power_grows_with_sample_size() {
        let grid = |n| PowerGrid {
            scenarios: vec![small(0.1, n)],
            methods: vec![method(NullMethod::Permutation)],
            replicates: 40,
            settings: settings(),
            seed: 3,
        };
        let lo = power_study(&grid(100)).unwrap().cells[0].power();
        let hi = power_study(&grid(600)).unwrap().cells[0].power();
        assert!(hi > lo, "{lo} vs {hi}");
    }

    #[test]
    fn cells_do_not_depend_on_grid_composition() {
        let s1 = small(0.1, 80);
        let s2 = small(0.2, 80);
        let methods = vec![method(NullMethod::Permutation)];
        let alone = PowerGrid {
            scenarios: vec![s2.clone()],
            methods: methods.clone(),
            replicates: 6,
            settings: settings(),
            seed: 10,
        };
        let both = PowerGrid {
            scenarios: vec![s1, s2],
            ..alone.clone()
        };
        assert_eq!(
            power_study(&alone).unwrap().cells[0],
            power_study(&both).unwrap().cells[1]
        );
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let mut bad = method(NullMethod::Permutation);
        bad.bandwidth = BandwidthSetting::Markers(100);
        let grid = PowerGrid {
            scenarios: vec![small(0.1, 50)],
            methods: vec![bad, method(NullMethod::Permutation)],
            replicates: 3,
            settings: settings(),
            seed: 1,
        };
        let table = power_study(&grid).unwrap();
        assert_eq!(table.cell(0, 0).failed, 3);
        assert!(table.cell(0, 0).error.is_some());
        assert_eq!(table.cell(0, 1).replicates(), 3);
        let mut tsv = Vec::new();
        table.write_tsv(&mut tsv).unwrap();
        let text = String::from_utf8(tsv).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].ends_with("NA\tNA\t0\t3"), "{}", rows[1]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let grid = PowerGrid {
            scenarios: vec![],
            methods: vec![method(NullMethod::Permutation)],
            replicates: 1,
            settings: settings(),
            seed: 0,
        };
        assert!(power_study(&grid).is_err());
    }
}
