//! Spike-in simulation: a CNV signal added to measurement noise for a random
//! subset of carriers, with a phenotype that depends only on carrier status.
//!
//! A dataset is built from three independent random substreams (noise,
//! cohort, marker spacing), all derived from one dataset seed, so any single
//! component can be regenerated on its own.

mod config;
mod presets;
mod study;

use std::fmt;
use std::io::BufRead;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, LogNormal, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::rng;
use crate::track::{MarkerTrack, Phenotype, PhenotypeKind};

pub use config::{parse_study, read_study};
pub use presets::{
    bandwidth_mode_preset, bandwidth_sweep_preset, null_check, preset, transforms_preset,
    NullCheckConfig, NullCheckReport, NullCheckRow, PRESETS,
};
pub use study::{
    power_study, power_study_with_progress, run_trial, run_trials, BandwidthSetting, MethodConfig,
    PowerCell, PowerGrid, PowerTable, TrialOutcome, TrialSettings,
};

/// Marker spacing in base pairs used when nothing else is configured.
pub const DEFAULT_SPACING_BP: u64 = 1500;

/// Log-scale spread of irregular gaps when not given. Gives a gap
/// coefficient of variation near 2, typical of genotyping-array spacing.
pub const DEFAULT_IRREGULAR_SIGMA: f64 = 1.25;

/// A residual matrix (subjects by markers) to resample noise from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    source: PathBuf,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    col_sd: Vec<f64>,
}

impl ResidualMatrix {
    /// Builds a matrix from row-major values.
    pub fn new(source: PathBuf, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows < 2 {
            return Err(Error::TooFewSubjects {
                needed: 2,
                found: n_rows,
            });
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::Empty("residual matrix has no columns".into()));
        }
        let mut values = Vec::with_capacity(n_rows * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    line: i + 1,
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let col_sd = (0..cols)
            .map(|j| {
                let col = (0..n_rows).map(|i| values[i * cols + j]);
                let mean = col.clone().sum::<f64>() / n_rows as f64;
                let ss: f64 = col.map(|v| (v - mean) * (v - mean)).sum();
                (ss / (n_rows - 1) as f64).sqrt()
            })
            .collect();
        Ok(ResidualMatrix {
            source,
            rows: n_rows,
            cols,
            values,
            col_sd,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Sample standard deviation of column `col`.
    pub fn column_sd(&self, col: usize) -> f64 {
        self.col_sd[col]
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

/// Reads a whitespace-separated numeric matrix, one subject per line.
///
/// Blank lines and `#` comments are skipped, as is a first line that does
/// not parse as numbers (a header).
pub fn load_residuals(path: impl AsRef<Path>) -> Result<ResidualMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    let mut seen_data_line = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            trimmed.split_whitespace().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteValue {
                        line: idx + 1,
                        field: col + 1,
                        value: row[col].to_string(),
                    });
                }
                rows.push(row);
            }
            Err(_) if !seen_data_line => {}
            Err(e) => {
                return Err(Error::MalformedRow {
                    line: idx + 1,
                    message: format!("residual value: {e}"),
                })
            }
        }
        seen_data_line = true;
    }
    ResidualMatrix::new(path.to_path_buf(), rows)
}

/// Sorted, distinct marker locations to draw windows of positions from.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionPool {
    source: PathBuf,
    positions: Vec<u64>,
}

impl PositionPool {
    pub fn new(source: PathBuf, mut positions: Vec<u64>) -> Result<Self> {
        positions.sort_unstable();
        if let Some(w) = positions.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLocation { position: w[0] });
        }
        if positions.is_empty() {
            return Err(Error::Empty("position file has no positions".into()));
        }
        Ok(PositionPool { source, positions })
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

/// Reads marker locations, one per line.
///
/// A tab-separated file whose header has a `position` column (such as an
/// intensity file) is also accepted; that column is used.
pub fn load_positions(path: impl AsRef<Path>) -> Result<PositionPool> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut column: Option<usize> = None;
    let mut seen_data_line = false;
    let mut positions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if !seen_data_line {
            seen_data_line = true;
            if let Some(c) = fields.iter().position(|f| *f == "position") {
                column = Some(c);
                continue;
            }
        }
        let field = fields.get(column.unwrap_or(0)).ok_or(Error::MalformedRow {
            line: idx + 1,
            message: "missing position field".into(),
        })?;
        let pos = field.parse::<u64>().map_err(|e| Error::MalformedRow {
            line: idx + 1,
            message: format!("position {field:?}: {e}"),
        })?;
        positions.push(pos);
    }
    PositionPool::new(path.to_path_buf(), positions)
}

/// Source of measurement noise.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Standard normal.
    Gaussian,
    /// Student t with `df > 2` degrees of freedom, rescaled to unit variance.
    StudentT { df: f64 },
    /// `0.8 Z + 0.6 (E - 1)` with `Z` standard normal and `E` unit
    /// exponential: mean 0, variance 1, right skewed.
    Skew,
    /// Columns and rows resampled from a residual matrix.
    Residuals(Arc<ResidualMatrix>),
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Gaussian => f.write_str("gaussian"),
            NoiseModel::StudentT { df } => write!(f, "t:{df}"),
            NoiseModel::Skew => f.write_str("skew"),
            NoiseModel::Residuals(m) => write!(f, "residuals:{}", m.source().display()),
        }
    }
}

/// How marker locations are laid out.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkerSpacing {
    /// Equally spaced, `bp` apart.
    Equal { bp: u64 },
    /// Log-normal gaps with the given median and log-scale spread, drawn
    /// afresh for every dataset.
    Irregular { median_bp: f64, sigma: f64 },
    /// A random window of consecutive locations from a position file.
    Resampled(Arc<PositionPool>),
}

impl fmt::Display for MarkerSpacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkerSpacing::Equal { bp } => write!(f, "equal:{bp}"),
            MarkerSpacing::Irregular { median_bp, sigma } => {
                write!(f, "irregular:{median_bp}:{sigma}")
            }
            MarkerSpacing::Resampled(p) => write!(f, "positions:{}", p.source().display()),
        }
    }
}

/// One simulation setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    /// Number of subjects.
    pub n: usize,
    /// Number of markers.
    pub markers: usize,
    /// Number of markers covered by the CNV.
    pub cnv_size: usize,
    /// First CNV marker; `None` centres the CNV.
    pub cnv_offset: Option<usize>,
    /// Population frequency of carriers.
    pub frequency: f64,
    /// Signal added to carriers, in units of the noise standard deviation.
    pub snr: f64,
    /// Carrier effect on the phenotype: a mean shift in standard deviations
    /// for continuous phenotypes, a log odds ratio for binary ones.
    pub effect: f64,
    pub phenotype: PhenotypeKind,
    /// Expected fraction of cases for binary phenotypes.
    pub case_fraction: f64,
    pub noise: NoiseModel,
    pub spacing: MarkerSpacing,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            n: 1000,
            markers: 200,
            cnv_size: 30,
            cnv_offset: None,
            frequency: 0.1,
            snr: 0.8,
            effect: 0.4,
            phenotype: PhenotypeKind::Continuous,
            case_fraction: 0.5,
            noise: NoiseModel::Gaussian,
            spacing: MarkerSpacing::Equal {
                bp: DEFAULT_SPACING_BP,
            },
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScenario(msg.into())
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!(
                "n = {} but at least 2 subjects are needed",
                self.n
            )));
        }
        if self.markers == 0 {
            return Err(invalid("markers must be positive"));
        }
        if self.cnv_size == 0 || self.cnv_size > self.markers {
            return Err(invalid(format!(
                "cnv_size = {} must lie in [1, {}]",
                self.cnv_size, self.markers
            )));
        }
        if let Some(off) = self.cnv_offset {
            if off + self.cnv_size > self.markers {
                return Err(invalid(format!(
                    "CNV at offset {off} with {} markers runs past marker {}",
                    self.cnv_size, self.markers
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.frequency) {
            return Err(invalid(format!(
                "frequency = {} outside [0, 1]",
                self.frequency
            )));
        }
        if !(self.snr.is_finite() && self.snr >= 0.0) {
            return Err(invalid(format!(
                "snr = {} must be finite and >= 0",
                self.snr
            )));
        }
        if !self.effect.is_finite() {
            return Err(invalid("effect must be finite"));
        }
        if self.phenotype == PhenotypeKind::Binary
            && !(self.case_fraction > 0.0 && self.case_fraction < 1.0)
        {
            return Err(invalid(format!(
                "case_fraction = {} outside (0, 1)",
                self.case_fraction
            )));
        }
        match &self.noise {
            NoiseModel::StudentT { df } if !(*df > 2.0 && df.is_finite()) => {
                return Err(invalid(format!("t noise needs df > 2, got {df}")));
            }
            NoiseModel::Residuals(m) if m.cols() < self.markers => {
                return Err(Error::DimensionMismatch {
                    line: 0,
                    expected: self.markers,
                    found: m.cols(),
                });
            }
            _ => {}
        }
        match &self.spacing {
            MarkerSpacing::Equal { bp } if *bp == 0 => {
                return Err(invalid("equal spacing must be positive"));
            }
            MarkerSpacing::Irregular { median_bp, sigma }
                if !(*median_bp > 0.0
                    && median_bp.is_finite()
                    && *sigma >= 0.0
                    && sigma.is_finite()) =>
            {
                return Err(invalid("irregular spacing needs median > 0 and sigma >= 0"));
            }
            MarkerSpacing::Resampled(p) if p.positions().len() < self.markers => {
                return Err(invalid(format!(
                    "position file holds {} locations, fewer than {} markers",
                    p.positions().len(),
                    self.markers
                )));
            }
            _ => {}
        }
        Ok(())
    }

    /// Marker indices covered by the CNV.
    pub fn cnv_span(&self) -> Range<usize> {
        let start = self
            .cnv_offset
            .unwrap_or((self.markers.saturating_sub(self.cnv_size)) / 2);
        start..start + self.cnv_size
    }

    /// Canonical description; replicate seeds are derived from it.
    pub fn key(&self) -> String {
        format!(
            "n={};markers={};cnv={}+{};frequency={};snr={};effect={};phenotype={};case_fraction={};noise={};spacing={}",
            self.n,
            self.markers,
            self.cnv_span().start,
            self.cnv_size,
            self.frequency,
            self.snr,
            self.effect,
            phenotype_name(self.phenotype),
            self.case_fraction,
            self.noise,
            self.spacing,
        )
    }
}

pub(crate) fn phenotype_name(kind: PhenotypeKind) -> &'static str {
    match kind {
        PhenotypeKind::Continuous => "continuous",
        PhenotypeKind::Binary => "binary",
    }
}

/// Seeds of the independent components of one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSeeds {
    pub noise: u64,
    pub cohort: u64,
    pub spacing: u64,
}

impl DatasetSeeds {
    pub fn new(seed: u64) -> Self {
        DatasetSeeds {
            noise: rng::derive_seed(seed, rng::label("noise")),
            cohort: rng::derive_seed(seed, rng::label("cohort")),
            spacing: rng::derive_seed(seed, rng::label("spacing")),
        }
    }
}

/// Noise matrix stored marker-major, with the noise scale of each marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub columns: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
}

fn synthetic_column(model: &NoiseModel, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model {
        NoiseModel::Gaussian => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
        NoiseModel::StudentT { df } => {
            let dist = StudentT::new(*df).expect("validated df");
            let unit = ((df - 2.0) / df).sqrt();
            (0..n).map(|_| dist.sample(rng) * unit).collect()
        }
        NoiseModel::Skew => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                let e: f64 = Exp1.sample(rng);
                0.8 * z + 0.6 * (e - 1.0)
            })
            .collect(),
        NoiseModel::Residuals(_) => unreachable!("not a synthetic model"),
    }
}

/// Draws the `n` by `J` noise matrix and each marker's noise scale.
pub fn sample_noise(scenario: &SimScenario, seed: u64) -> Result<Noise> {
    scenario.validate()?;
    let (n, markers) = (scenario.n, scenario.markers);
    let mut rng = rng::stream(seed, 0);
    match &scenario.noise {
        NoiseModel::Residuals(matrix) => {
            let mut cols = rand::seq::index::sample(&mut rng, matrix.cols(), markers).into_vec();
            cols.sort_unstable();
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..matrix.rows())).collect();
            let columns = cols
                .iter()
                .map(|&c| rows.iter().map(|&r| matrix.get(r, c)).collect())
                .collect();
            let scale = cols.iter().map(|&c| matrix.column_sd(c)).collect();
            Ok(Noise { columns, scale })
        }
        model => Ok(Noise {
            columns: (0..markers)
                .map(|_| synthetic_column(model, n, &mut rng))
                .collect(),
            scale: vec![1.0; markers],
        }),
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept giving the requested overall case fraction when carriers have
/// log odds `effect` higher than non-carriers.
pub fn binary_intercept(frequency: f64, effect: f64, case_fraction: f64) -> f64 {
    let rate = |b0: f64| (1.0 - frequency) * logistic(b0) + frequency * logistic(b0 + effect);
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < case_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws carrier indicators and a phenotype that depends only on them.
pub fn generate_cohort(scenario: &SimScenario, seed: u64) -> Result<(Vec<bool>, Phenotype)> {
    scenario.validate()?;
    let mut rng = rng::stream(seed, 0);
    let carriers: Vec<bool> = (0..scenario.n)
        .map(|_| rng.random::<f64>() < scenario.frequency)
        .collect();
    let phen = match scenario.phenotype {
        PhenotypeKind::Continuous => {
            let y = carriers
                .iter()
                .map(|&z| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    if z {
                        scenario.effect + e
                    } else {
                        e
                    }
                })
                .collect();
            Phenotype::continuous(y)?
        }
        PhenotypeKind::Binary => {
            let b0 = binary_intercept(scenario.frequency, scenario.effect, scenario.case_fraction);
            let y = carriers
                .iter()
                .map(|&z| {
                    let risk = logistic(if z { b0 + scenario.effect } else { b0 });
                    if rng.random::<f64>() < risk {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Phenotype::binary(y)?
        }
    };
    Ok((carriers, phen))
}

/// Marker locations for one dataset.
pub fn marker_positions(scenario: &SimScenario, seed: u64) -> Result<Vec<u64>> {
    scenario.validate()?;
    let markers = scenario.markers;
    let mut rng = rng::stream(seed, 0);
    Ok(match &scenario.spacing {
        MarkerSpacing::Equal { bp } => (0..markers as u64).map(|j| j * bp).collect(),
        MarkerSpacing::Irregular { median_bp, sigma } => {
            let gaps = LogNormal::new(median_bp.ln(), *sigma).expect("validated spacing");
            let mut pos = Vec::with_capacity(markers);
            let mut at = 0u64;
            pos.push(at);
            for _ in 1..markers {
                let g: f64 = gaps.sample(&mut rng);
                at += (g.round() as u64).max(1);
                pos.push(at);
            }
            pos
        }
        MarkerSpacing::Resampled(pool) => {
            let all = pool.positions();
            let start = rng.random_range(0..=all.len() - markers);
            all[start..start + markers].to_vec()
        }
    })
}

/// A simulated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub track: MarkerTrack,
    pub phen: Phenotype,
    /// Carrier indicator per subject.
    pub carriers: Vec<bool>,
    /// Marker indices covered by the CNV.
    pub cnv: Range<usize>,
    /// Noise scale per marker.
    pub noise_scale: Vec<f64>,
}

/// Noise plus `snr · σ_j` for carriers at CNV markers, with the cohort's
/// phenotype.
pub fn build_dataset(scenario: &SimScenario, seed: u64) -> Result<SimDataset> {
    scenario.validate()?;
    let seeds = DatasetSeeds::new(seed);
    let Noise { mut columns, scale } = sample_noise(scenario, seeds.noise)?;
    let (carriers, phen) = generate_cohort(scenario, seeds.cohort)?;
    let positions = marker_positions(scenario, seeds.spacing)?;
    let cnv = scenario.cnv_span();
    for j in cnv.clone() {
        let shift = scenario.snr * scale[j];
        for (x, &z) in columns[j].iter_mut().zip(&carriers) {
            if z {
                *x += shift;
            }
        }
    }
    let track = MarkerTrack::from_columns(positions, columns)?;
    Ok(SimDataset {
        track,
        phen,
        carriers,
        cnv,
        noise_scale: scale,
    })
}
