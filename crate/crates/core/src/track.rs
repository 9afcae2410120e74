//! Marker tracks, phenotypes and their TSV file formats.
//!
//! Intensity files are tab-separated with one marker per row:
//!
//! ```text
//! marker_id  position  S1     S2     S3
//! rs1        10        0.12   -0.40  0.03
//! ```
//!
//! Phenotype files carry one value per line in the same subject order as the
//! intensity columns, with an optional `phenotype` header line.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Marker positions plus the subject-by-marker intensity matrix.
///
/// Intensities are stored marker-major: the `n` values for marker `j` are
/// contiguous, which is the access pattern of every marker test.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerTrack {
    marker_ids: Vec<String>,
    subject_ids: Vec<String>,
    positions: Vec<u64>,
    intensities: Vec<f64>,
}

impl MarkerTrack {
    /// Builds a track from per-marker columns, sorting markers by position.
    pub fn new(
        marker_ids: Vec<String>,
        subject_ids: Vec<String>,
        positions: Vec<u64>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_markers = positions.len();
        if n_markers == 0 {
            return Err(Error::Empty("track has no markers".into()));
        }
        let n = subject_ids.len();
        if n == 0 {
            return Err(Error::Empty("track has no subjects".into()));
        }
        if marker_ids.len() != n_markers || columns.len() != n_markers {
            return Err(Error::DimensionMismatch {
                line: 0,
                expected: n_markers,
                found: marker_ids.len().min(columns.len()),
            });
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    line: j + 2,
                    expected: n + 2,
                    found: col.len() + 2,
                });
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    line: j + 2,
                    field: i + 3,
                    value: col[i].to_string(),
                });
            }
        }

        let mut order: Vec<usize> = (0..n_markers).collect();
        order.sort_by_key(|&j| positions[j]);
        for w in order.windows(2) {
            if positions[w[0]] == positions[w[1]] {
                return Err(Error::DuplicateLocation {
                    position: positions[w[0]],
                });
            }
        }

        let mut intensities = Vec::with_capacity(n * n_markers);
        for &j in &order {
            intensities.extend_from_slice(&columns[j]);
        }
        Ok(MarkerTrack {
            marker_ids: order.iter().map(|&j| marker_ids[j].clone()).collect(),
            subject_ids,
            positions: order.iter().map(|&j| positions[j]).collect(),
            intensities,
        })
    }

    /// Convenience constructor with generated marker and subject labels.
    pub fn from_columns(positions: Vec<u64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let marker_ids = (1..=positions.len()).map(|j| format!("m{j}")).collect();
        let subject_ids = (1..=n).map(|i| format!("S{i}")).collect();
        Self::new(marker_ids, subject_ids, positions, columns)
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_markers(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn marker_ids(&self) -> &[String] {
        &self.marker_ids
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    /// Intensities of marker `j` across all subjects.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_subjects();
        &self.intensities[j * n..(j + 1) * n]
    }

    pub fn intensity(&self, subject: usize, marker: usize) -> f64 {
        self.intensities[marker * self.n_subjects() + subject]
    }

    /// Reorders subjects: subject `i` of the result is subject `order[i]` here.
    pub fn reorder_subjects(&self, order: &[usize]) -> MarkerTrack {
        assert_eq!(order.len(), self.n_subjects());
        let n = self.n_subjects();
        let mut intensities = Vec::with_capacity(self.intensities.len());
        for j in 0..self.n_markers() {
            let col = &self.intensities[j * n..(j + 1) * n];
            intensities.extend(order.iter().map(|&i| col[i]));
        }
        MarkerTrack {
            marker_ids: self.marker_ids.clone(),
            subject_ids: order.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            positions: self.positions.clone(),
            intensities,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhenotypeKind {
    Continuous,
    Binary,
}

/// Per-subject outcomes; binary outcomes are stored as 0.0 / 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    values: Vec<f64>,
    kind: PhenotypeKind,
}

impl Phenotype {
    pub fn continuous(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("phenotype has no values".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                line: i + 1,
                field: 1,
                value: values[i].to_string(),
            });
        }
        Ok(Phenotype {
            values,
            kind: PhenotypeKind::Continuous,
        })
    }

    pub fn binary(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("phenotype has no values".into()));
        }
        if let Some(i) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryValue {
                line: i + 1,
                value: values[i].to_string(),
            });
        }
        let cases = values.iter().filter(|&&v| v == 1.0).count();
        if cases == 0 || cases == values.len() {
            return Err(Error::DegenerateGroups);
        }
        Ok(Phenotype {
            values,
            kind: PhenotypeKind::Binary,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PhenotypeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reorders subjects: value `i` of the result is value `order[i]` here.
    pub fn reorder(&self, order: &[usize]) -> Phenotype {
        Phenotype {
            values: order.iter().map(|&i| self.values[i]).collect(),
            kind: self.kind,
        }
    }

    pub fn check_matches(&self, track: &MarkerTrack) -> Result<()> {
        if self.len() != track.n_subjects() {
            return Err(Error::LengthMismatch {
                expected: track.n_subjects(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn load_track(path: impl AsRef<Path>) -> Result<MarkerTrack> {
    let path = path.as_ref();
    read_track(open(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses the intensity TSV format from any reader.
pub fn read_track(reader: impl BufRead) -> Result<MarkerTrack> {
    let mut subject_ids: Option<Vec<String>> = None;
    let mut marker_ids = Vec::new();
    let mut positions = Vec::new();
    let mut columns = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<track>", e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();

        let Some(subjects) = &subject_ids else {
            if fields.len() < 3 || fields[0] != "marker_id" || fields[1] != "position" {
                return Err(Error::MalformedRow {
                    line: line_no,
                    message: "header must be marker_id<TAB>position<TAB>subject...".into(),
                });
            }
            subject_ids = Some(fields[2..].iter().map(|s| s.to_string()).collect());
            continue;
        };

        let expected = subjects.len() + 2;
        if fields.len() != expected {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected,
                found: fields.len(),
            });
        }
        let position = fields[1].parse::<u64>().map_err(|_| Error::MalformedRow {
            line: line_no,
            message: format!("position {:?} is not a non-negative integer", fields[1]),
        })?;
        let mut column = Vec::with_capacity(subjects.len());
        for (k, raw) in fields[2..].iter().enumerate() {
            let value = raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                line: line_no,
                message: format!("intensity {raw:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    line: line_no,
                    field: k + 3,
                    value: raw.to_string(),
                });
            }
            column.push(value);
        }
        marker_ids.push(fields[0].to_string());
        positions.push(position);
        columns.push(column);
    }

    let subject_ids =
        subject_ids.ok_or_else(|| Error::Empty("intensity file has no header".into()))?;
    MarkerTrack::new(marker_ids, subject_ids, positions, columns)
}

pub fn write_track(track: &MarkerTrack, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "marker_id\tposition")?;
    for s in track.subject_ids() {
        write!(out, "\t{s}")?;
    }
    writeln!(out)?;
    for j in 0..track.n_markers() {
        write!(out, "{}\t{}", track.marker_ids[j], track.positions[j])?;
        for v in track.column(j) {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn load_phenotype(path: impl AsRef<Path>, kind: PhenotypeKind) -> Result<Phenotype> {
    let path = path.as_ref();
    read_phenotype(open(path)?, kind).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_phenotype(reader: impl BufRead, kind: PhenotypeKind) -> Result<Phenotype> {
    let mut values = Vec::new();
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<phenotype>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push((idx + 1, trimmed.to_string()));
    }
    if lines.first().is_some_and(|(_, l)| l == "phenotype") {
        lines.remove(0);
    }
    for (line_no, raw) in lines {
        let parsed = raw.parse::<f64>();
        match kind {
            PhenotypeKind::Binary => match parsed {
                Ok(v) if v == 0.0 || v == 1.0 => values.push(v),
                _ => {
                    return Err(Error::NonBinaryValue {
                        line: line_no,
                        value: raw,
                    })
                }
            },
            PhenotypeKind::Continuous => match parsed {
                Ok(v) if v.is_finite() => values.push(v),
                Ok(_) => {
                    return Err(Error::NonFiniteValue {
                        line: line_no,
                        field: 1,
                        value: raw,
                    })
                }
                Err(_) => {
                    return Err(Error::MalformedRow {
                        line: line_no,
                        message: format!("phenotype {raw:?} is not a number"),
                    })
                }
            },
        }
    }
    match kind {
        PhenotypeKind::Continuous => Phenotype::continuous(values),
        PhenotypeKind::Binary => Phenotype::binary(values),
    }
}

pub fn write_phenotype(phen: &Phenotype, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "phenotype")?;
    for v in phen.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}
