//! `key = value` study files.
//!
//! Scenario and method keys take comma-separated lists; the grid is the
//! cross product of all lists. Run keys take a single value.
//!
//! | key | values | default |
//! |---|---|---|
//! | `n` | subjects | 1000 |
//! | `markers` | markers per dataset | 200 |
//! | `cnv_size` | markers in the CNV | 30 |
//! | `cnv_offset` | first CNV marker, or `center` | `center` |
//! | `frequency` | carrier frequency | 0.1 |
//! | `snr` | signal in noise SDs | 0.8 |
//! | `effect` | phenotype effect | 0.4 |
//! | `phenotype` | `continuous`, `binary` | `continuous` |
//! | `case_fraction` | binary case fraction | 0.5 |
//! | `noise` | `gaussian`, `t:DF`, `skew`, `residuals:PATH` | `gaussian` |
//! | `spacing` | `equal[:BP]`, `irregular[:MEDIAN[:SIGMA]]`, `positions:PATH` | `equal:1500` |
//! | `transform` | `p`, `z`, `log` | `z` |
//! | `signed` | `true`, `false` | `true` |
//! | `kernel` | `flat`, `epanechnikov` | `flat` |
//! | `bandwidth` | `markers:K`, `bp:H`, `markers:matched`, `bp:matched` | `markers:matched` |
//! | `null` | `permutation`, `monte_carlo` | `permutation` |
//! | `replicates` | replicates per cell | 200 |
//! | `permutations` | null draws, or `exhaustive` | 1000 |
//! | `alpha` | level | 0.05 |
//! | `seed` | master seed | 1 |
//!
//! Relative paths are resolved against the directory of the study file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use super::study::{BandwidthSetting, MethodConfig, PowerGrid, TrialSettings};
use super::{
    load_positions, load_residuals, MarkerSpacing, NoiseModel, SimScenario,
    DEFAULT_IRREGULAR_SIGMA, DEFAULT_SPACING_BP,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelShape, TransformKind, TransformSpec};
use crate::significance::{NullMethod, Permutations, DEFAULT_PERMUTATIONS};
use crate::track::PhenotypeKind;

const SCENARIO_KEYS: &[&str] = &[
    "n",
    "markers",
    "cnv_size",
    "cnv_offset",
    "frequency",
    "snr",
    "effect",
    "phenotype",
    "case_fraction",
    "noise",
    "spacing",
];
const METHOD_KEYS: &[&str] = &["transform", "signed", "kernel", "bandwidth", "null"];
const RUN_KEYS: &[&str] = &["replicates", "permutations", "alpha", "seed"];

struct Entry {
    line: usize,
    values: Vec<String>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| config_err(line, format!("{key}: {v:?}: {e}")))
}

fn parse_noise(line: usize, v: &str, base: &Path) -> Result<NoiseModel> {
    let (head, arg) = v.split_once(':').map_or((v, None), |(h, a)| (h, Some(a)));
    match (head, arg) {
        ("gaussian", None) => Ok(NoiseModel::Gaussian),
        ("skew", None) => Ok(NoiseModel::Skew),
        ("t", Some(df)) => Ok(NoiseModel::StudentT {
            df: parse_num(line, "noise", df)?,
        }),
        ("residuals", Some(path)) => Ok(NoiseModel::Residuals(Arc::new(load_residuals(
            base.join(path),
        )?))),
        _ => Err(config_err(line, format!("noise: unknown model {v:?}"))),
    }
}

fn parse_spacing(line: usize, v: &str, base: &Path) -> Result<MarkerSpacing> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["equal"] => Ok(MarkerSpacing::Equal {
            bp: DEFAULT_SPACING_BP,
        }),
        ["equal", bp] => Ok(MarkerSpacing::Equal {
            bp: parse_num(line, "spacing", bp)?,
        }),
        ["irregular"] => Ok(MarkerSpacing::Irregular {
            median_bp: DEFAULT_SPACING_BP as f64,
            sigma: DEFAULT_IRREGULAR_SIGMA,
        }),
        ["irregular", median] => Ok(MarkerSpacing::Irregular {
            median_bp: parse_num(line, "spacing", median)?,
            sigma: DEFAULT_IRREGULAR_SIGMA,
        }),
        ["irregular", median, sigma] => Ok(MarkerSpacing::Irregular {
            median_bp: parse_num(line, "spacing", median)?,
            sigma: parse_num(line, "spacing", sigma)?,
        }),
        ["positions", ..] => {
            let path = &v["positions:".len()..];
            Ok(MarkerSpacing::Resampled(Arc::new(load_positions(
                base.join(path),
            )?)))
        }
        _ => Err(config_err(line, format!("spacing: unknown layout {v:?}"))),
    }
}

fn parse_bandwidth(line: usize, v: &str) -> Result<BandwidthSetting> {
    match v.split_once(':') {
        Some(("markers", "matched")) => Ok(BandwidthSetting::MatchedMarkers),
        Some(("bp", "matched")) => Ok(BandwidthSetting::MatchedBasePairs),
        Some(("markers", k)) => Ok(BandwidthSetting::Markers(parse_num(line, "bandwidth", k)?)),
        Some(("bp", h)) => Ok(BandwidthSetting::BasePairs(parse_num(
            line,
            "bandwidth",
            h,
        )?)),
        _ => Err(config_err(
            line,
            format!("bandwidth: unknown setting {v:?}"),
        )),
    }
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "signed" => Ok(true),
        "false" | "no" | "unsigned" => Ok(false),
        _ => Err(config_err(
            line,
            format!("{key}: expected true or false, got {v:?}"),
        )),
    }
}

fn parse_null(line: usize, v: &str) -> Result<NullMethod> {
    match v {
        "permutation" => Ok(NullMethod::Permutation),
        "monte_carlo" | "monte-carlo" => Ok(NullMethod::MonteCarlo),
        _ => Err(config_err(line, format!("null: unknown method {v:?}"))),
    }
}

/// Cross product of per-axis choices, last axis fastest.
fn product(axes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &len in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..len).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

/// Parses a study file's text; `base` anchors relative paths.
pub fn parse_study(text: &str, base: &Path) -> Result<PowerGrid> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, "expected `key = value`"))?;
        let key = key.trim();
        if !SCENARIO_KEYS.contains(&key) && !METHOD_KEYS.contains(&key) && !RUN_KEYS.contains(&key)
        {
            return Err(config_err(line, format!("unknown key {key:?}")));
        }
        let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(config_err(line, format!("{key}: empty value")));
        }
        if RUN_KEYS.contains(&key) && values.len() != 1 {
            return Err(config_err(line, format!("{key} takes a single value")));
        }
        if entries.contains_key(key) {
            return Err(config_err(line, format!("{key} given twice")));
        }
        entries.insert(key.to_string(), Entry { line, values });
    }
    if entries.is_empty() {
        return Err(Error::InvalidScenario(
            "the study file defines no settings".into(),
        ));
    }

    let list = |key: &str| -> Option<&Entry> { entries.get(key) };
    fn axis<T>(
        entry: Option<&Entry>,
        default: T,
        parse: impl Fn(usize, &str) -> Result<T>,
    ) -> Result<Vec<T>> {
        match entry {
            None => Ok(vec![default]),
            Some(e) => e.values.iter().map(|v| parse(e.line, v)).collect(),
        }
    }

    let d = SimScenario::default();
    let n = axis(list("n"), d.n, |l, v| parse_num(l, "n", v))?;
    let markers = axis(list("markers"), d.markers, |l, v| {
        parse_num(l, "markers", v)
    })?;
    let cnv_size = axis(list("cnv_size"), d.cnv_size, |l, v| {
        parse_num(l, "cnv_size", v)
    })?;
    let cnv_offset = axis(list("cnv_offset"), None, |l, v| {
        if v == "center" {
            Ok(None)
        } else {
            parse_num(l, "cnv_offset", v).map(Some)
        }
    })?;
    let frequency = axis(list("frequency"), d.frequency, |l, v| {
        parse_num(l, "frequency", v)
    })?;
    let snr = axis(list("snr"), d.snr, |l, v| parse_num(l, "snr", v))?;
    let effect = axis(list("effect"), d.effect, |l, v| parse_num(l, "effect", v))?;
    let phenotype = axis(list("phenotype"), d.phenotype, |l, v| match v {
        "continuous" => Ok(PhenotypeKind::Continuous),
        "binary" => Ok(PhenotypeKind::Binary),
        _ => Err(config_err(l, format!("phenotype: unknown kind {v:?}"))),
    })?;
    let case_fraction = axis(list("case_fraction"), d.case_fraction, |l, v| {
        parse_num(l, "case_fraction", v)
    })?;
    let noise = axis(list("noise"), d.noise.clone(), |l, v| {
        parse_noise(l, v, base)
    })?;
    let spacing = axis(list("spacing"), d.spacing.clone(), |l, v| {
        parse_spacing(l, v, base)
    })?;

    let transform = axis(list("transform"), TransformKind::Z, |l, v| {
        TransformKind::from_str(v).map_err(|e| config_err(l, e.to_string()))
    })?;
    let signed = axis(list("signed"), true, |l, v| parse_bool(l, "signed", v))?;
    let kernel = axis(list("kernel"), KernelShape::Flat, |l, v| {
        KernelShape::from_str(v).map_err(|e| config_err(l, e.to_string()))
    })?;
    let bandwidth = axis(
        list("bandwidth"),
        BandwidthSetting::MatchedMarkers,
        parse_bandwidth,
    )?;
    let null = axis(list("null"), NullMethod::Permutation, parse_null)?;

    let replicates = axis(list("replicates"), 200usize, |l, v| {
        parse_num(l, "replicates", v)
    })?[0];
    let permutations = axis(
        list("permutations"),
        Permutations::Random(DEFAULT_PERMUTATIONS),
        |l, v| {
            if v == "exhaustive" {
                Ok(Permutations::Exhaustive)
            } else {
                parse_num(l, "permutations", v).map(Permutations::Random)
            }
        },
    )?[0];
    let alpha = axis(list("alpha"), 0.05f64, |l, v| parse_num(l, "alpha", v))?[0];
    let seed = axis(list("seed"), 1u64, |l, v| parse_num(l, "seed", v))?[0];

    let scenarios = product(&[
        n.len(),
        markers.len(),
        cnv_size.len(),
        cnv_offset.len(),
        frequency.len(),
        snr.len(),
        effect.len(),
        phenotype.len(),
        case_fraction.len(),
        noise.len(),
        spacing.len(),
    ])
    .into_iter()
    .map(|i| SimScenario {
        n: n[i[0]],
        markers: markers[i[1]],
        cnv_size: cnv_size[i[2]],
        cnv_offset: cnv_offset[i[3]],
        frequency: frequency[i[4]],
        snr: snr[i[5]],
        effect: effect[i[6]],
        phenotype: phenotype[i[7]],
        case_fraction: case_fraction[i[8]],
        noise: noise[i[9]].clone(),
        spacing: spacing[i[10]].clone(),
    })
    .collect::<Vec<_>>();
    for s in &scenarios {
        s.validate()?;
    }

    let methods = product(&[
        transform.len(),
        signed.len(),
        kernel.len(),
        bandwidth.len(),
        null.len(),
    ])
    .into_iter()
    .map(|i| MethodConfig {
        transform: TransformSpec::new(transform[i[0]], signed[i[1]]),
        shape: kernel[i[2]],
        bandwidth: bandwidth[i[3]],
        null: null[i[4]],
    })
    .collect();

    if replicates == 0 {
        return Err(config_err(
            list("replicates").map_or(0, |e| e.line),
            "replicates must be positive",
        ));
    }
    if matches!(permutations, Permutations::Random(0)) {
        return Err(Error::InvalidB);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }

    Ok(PowerGrid {
        scenarios,
        methods,
        replicates,
        settings: TrialSettings {
            permutations,
            alpha,
        },
        seed,
    })
}

/// Reads and parses a study file.
pub fn read_study(path: impl AsRef<Path>) -> Result<PowerGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_study(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_the_cross_product() {
        let text = "# power by size\n\
                    n = 500\n\
                    cnv_size = 10, 20, 30\n\
                    transform = p, z\n\
                    signed = true, false\n\
                    bandwidth = markers:matched, bp:matched\n\
                    replicates = 50\n\
                    permutations = 99\n\
                    seed = 4 # trailing comment\n";
        let g = parse_study(text, Path::new(".")).unwrap();
        assert_eq!(g.scenarios.len(), 3);
        assert_eq!(g.methods.len(), 8);
        assert_eq!(g.scenarios[2].cnv_size, 30);
        assert_eq!(g.scenarios[0].n, 500);
        assert_eq!(g.replicates, 50);
        assert_eq!(g.seed, 4);
        assert_eq!(g.settings.permutations, Permutations::Random(99));
        assert_eq!(g.methods[1].bandwidth, BandwidthSetting::MatchedBasePairs);
        assert_eq!(
            g.methods[2].transform,
            TransformSpec::new(TransformKind::P, false)
        );
    }

    #[test]
    fn empty_or_bad_files_are_rejected() {
        assert!(parse_study("# nothing here\n\n", Path::new("."))
            .unwrap_err()
            .is_validation());
        for bad in [
            "colour = red",
            "n 100",
            "n = 10, ",
            "seed = 1, 2",
            "kernel = gaussian",
            "n = 100\nn = 200",
            "bandwidth = widest",
            "noise = t",
        ] {
            let err = parse_study(bad, Path::new(".")).unwrap_err();
            assert!(err.is_validation(), "{bad}: {err}");
        }
        assert!(matches!(
            parse_study("frequency = 2", Path::new(".")),
            Err(Error::InvalidScenario(_))
        ));
        assert!(matches!(
            parse_study("alpha = 1.5", Path::new(".")),
            Err(Error::InvalidAlpha(_))
        ));
    }

    #[test]
    fn models_and_layouts_parse() {
        let g = parse_study(
            "noise = gaussian, t:5, skew\nspacing = equal:1000, irregular:2000:0.5\nnull = monte_carlo\npermutations = exhaustive\nn = 6",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(g.scenarios.len(), 6);
        assert_eq!(g.scenarios[2].noise, NoiseModel::StudentT { df: 5.0 });
        assert_eq!(
            g.scenarios[3].spacing,
            MarkerSpacing::Irregular {
                median_bp: 2000.0,
                sigma: 0.5
            }
        );
        assert_eq!(g.methods[0].null, NullMethod::MonteCarlo);
        assert_eq!(g.settings.permutations, Permutations::Exhaustive);
    }

    #[test]
    fn relative_files_resolve_against_the_study() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("pos.txt"),
            (0..300).map(|i| format!("{}\n", i * 7)).collect::<String>(),
        )
        .unwrap();
        let study = dir.path().join("study.txt");
        std::fs::write(&study, "spacing = positions:pos.txt\n").unwrap();
        let g = read_study(&study).unwrap();
        match &g.scenarios[0].spacing {
            MarkerSpacing::Resampled(p) => assert_eq!(p.positions().len(), 300),
            other => panic!("{other:?}"),
        }
        std::fs::write(&study, "noise = residuals:missing.tsv\n").unwrap();
        assert!(matches!(read_study(&study), Err(Error::Io { .. })));
    }
}
