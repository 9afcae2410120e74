use std::io::Write;

use super::study::{
    power_study_with_progress, BandwidthSetting, MethodConfig, PowerCell, PowerGrid, TrialSettings,
};
use super::{MarkerSpacing, SimScenario, DEFAULT_IRREGULAR_SIGMA, DEFAULT_SPACING_BP};
use crate::error::Result;
use crate::kernel::{KernelShape, TransformKind, TransformSpec};
use crate::significance::{NullMethod, Permutations, DEFAULT_PERMUTATIONS};

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &["transforms", "bandwidth-mode", "bandwidth-sweep"];

const CNV_SIZES: [usize; 5] = [10, 20, 30, 40, 50];

fn power_grid(scenarios: Vec<SimScenario>, methods: Vec<MethodConfig>) -> PowerGrid {
    PowerGrid {
        scenarios,
        methods,
        replicates: 200,
        settings: TrialSettings {
            permutations: Permutations::Random(DEFAULT_PERMUTATIONS),
            alpha: 0.05,
        },
        seed: 1,
    }
}

fn by_cnv_size(base: SimScenario) -> Vec<SimScenario> {
    CNV_SIZES
        .iter()
        .map(|&cnv_size| SimScenario {
            cnv_size,
            ..base.clone()
        })
        .collect()
}

/// Every transform, signed and unsigned, at the matched bandwidth, across
/// CNV sizes.
pub fn transforms_preset() -> PowerGrid {
    let methods = [TransformKind::P, TransformKind::Z, TransformKind::Log]
        .into_iter()
        .flat_map(|kind| {
            [true, false].map(|signed| MethodConfig {
                shape: KernelShape::Flat,
                bandwidth: BandwidthSetting::MatchedMarkers,
                transform: TransformSpec::new(kind, signed),
                null: NullMethod::Permutation,
            })
        })
        .collect();
    power_grid(by_cnv_size(SimScenario::default()), methods)
}

/// Constant-marker against constant-width bandwidths on irregularly spaced
/// markers, both matched to the CNV, across CNV sizes.
pub fn bandwidth_mode_preset() -> PowerGrid {
    let base = SimScenario {
        spacing: MarkerSpacing::Irregular {
            median_bp: DEFAULT_SPACING_BP as f64,
            sigma: DEFAULT_IRREGULAR_SIGMA,
        },
        ..SimScenario::default()
    };
    let methods = [
        BandwidthSetting::MatchedMarkers,
        BandwidthSetting::MatchedBasePairs,
    ]
    .map(|bandwidth| MethodConfig {
        shape: KernelShape::Flat,
        bandwidth,
        transform: TransformSpec::new(TransformKind::Log, false),
        null: NullMethod::Permutation,
    })
    .to_vec();
    power_grid(by_cnv_size(base), methods)
}

/// Flat and Epanechnikov kernels over a range of marker bandwidths for a
/// 30-marker CNV.
pub fn bandwidth_sweep_preset() -> PowerGrid {
    let methods = [KernelShape::Flat, KernelShape::Epanechnikov]
        .into_iter()
        .flat_map(|shape| {
            CNV_SIZES.map(|k| MethodConfig {
                shape,
                bandwidth: BandwidthSetting::Markers(k),
                transform: TransformSpec::new(TransformKind::Log, false),
                null: NullMethod::Permutation,
            })
        })
        .collect();
    power_grid(vec![SimScenario::default()], methods)
}

/// Looks up a power preset by name.
pub fn preset(name: &str) -> Option<PowerGrid> {
    match name {
        "transforms" => Some(transforms_preset()),
        "bandwidth-mode" => Some(bandwidth_mode_preset()),
        "bandwidth-sweep" => Some(bandwidth_sweep_preset()),
        _ => None,
    }
}

/// Level check under two null settings: no CNV at all, and a CNV carried
/// by half the subjects with no phenotype association.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCheckConfig {
    pub n: usize,
    pub markers: usize,
    pub cnv_size: usize,
    /// Signal strength in the no-CNV setting (irrelevant with no carriers).
    pub snr_no_cnv: f64,
    /// Signal strength in the no-association setting.
    pub snr_no_association: f64,
    /// Carrier frequency in the no-association setting.
    pub association_frequency: f64,
    pub shape: KernelShape,
    pub bandwidth: BandwidthSetting,
    pub transform: TransformSpec,
    pub replicates: usize,
    pub permutations: Permutations,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for NullCheckConfig {
    fn default() -> Self {
        NullCheckConfig {
            n: 200,
            markers: 200,
            cnv_size: 30,
            snr_no_cnv: 0.8,
            snr_no_association: 1.6,
            association_frequency: 0.5,
            shape: KernelShape::Flat,
            bandwidth: BandwidthSetting::Markers(30),
            transform: TransformSpec::new(TransformKind::Z, true),
            replicates: 500,
            permutations: Permutations::Random(DEFAULT_PERMUTATIONS),
            alpha: 0.05,
            seed: 1,
        }
    }
}

impl NullCheckConfig {
    pub fn no_cnv(&self) -> SimScenario {
        SimScenario {
            n: self.n,
            markers: self.markers,
            cnv_size: self.cnv_size,
            frequency: 0.0,
            snr: self.snr_no_cnv,
            effect: 0.0,
            ..SimScenario::default()
        }
    }

    pub fn no_association(&self) -> SimScenario {
        SimScenario {
            n: self.n,
            markers: self.markers,
            cnv_size: self.cnv_size,
            frequency: self.association_frequency,
            snr: self.snr_no_association,
            effect: 0.0,
            ..SimScenario::default()
        }
    }

    /// Both settings crossed with the Monte Carlo and permutation nulls.
    pub fn grid(&self) -> PowerGrid {
        let method = |null| MethodConfig {
            shape: self.shape,
            bandwidth: self.bandwidth,
            transform: self.transform,
            null,
        };
        PowerGrid {
            scenarios: vec![self.no_cnv(), self.no_association()],
            methods: vec![
                method(NullMethod::MonteCarlo),
                method(NullMethod::Permutation),
            ],
            replicates: self.replicates,
            settings: TrialSettings {
                permutations: self.permutations,
                alpha: self.alpha,
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullCheckRow {
    pub setting: &'static str,
    pub monte_carlo: PowerCell,
    pub permutation: PowerCell,
}

/// Rejection rates of both nulls in both settings.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCheckReport {
    pub rows: Vec<NullCheckRow>,
}

fn fmt_cell(c: &PowerCell) -> String {
    let se = c.se().map_or_else(|| "NA".to_string(), |s| s.to_string());
    let rate = if c.replicates() == 0 {
        "NA".to_string()
    } else {
        c.power().to_string()
    };
    format!("{rate}\t{se}")
}

impl NullCheckReport {
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "setting\tmonte_carlo\tmonte_carlo_se\tpermutation\tpermutation_se\treplicates\tfailed"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.setting,
                fmt_cell(&r.monte_carlo),
                fmt_cell(&r.permutation),
                r.permutation.replicates().min(r.monte_carlo.replicates()),
                r.permutation.failed.max(r.monte_carlo.failed),
            )?;
        }
        Ok(())
    }
}

/// Runs the level check.
pub fn null_check(
    config: &NullCheckConfig,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<NullCheckReport> {
    let table = power_study_with_progress(&config.grid(), progress)?;
    let rows = ["no_cnv", "no_association"]
        .into_iter()
        .enumerate()
        .map(|(s, setting)| NullCheckRow {
            setting,
            monte_carlo: table.cell(s, 0).clone(),
            permutation: table.cell(s, 1).clone(),
        })
        .collect();
    Ok(NullCheckReport { rows })
}
