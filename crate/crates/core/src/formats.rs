//! On-disk formats: CSV plot data and JSON matrices.
//!
//! Floats in CSV are written with 17 significant digits so every value
//! round-trips exactly. All writers replace their target atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::biphoton::JsiGrid;
use crate::classical::{DriftRow, SpectrumTrace, SweepRow};
use crate::error::{Error, Result};
use crate::modeops::{FrequencyGrid, ModeTransform};
use crate::qfp::DensityMatrix;

/// Exact-round-trip rendering of a double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Writes a header plus pre-formatted rows as CSV.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    write_atomic(path, &csv_bytes(header, rows)?)
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Reads one named numeric column from a CSV with any other columns.
pub fn read_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let col = r.headers()?.iter().position(|h| h == name).ok_or_else(|| {
        Error::InvalidArgument(format!("{}: no column named {name:?}", path.display()))
    })?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let field = rec.get(col).unwrap_or("");
            field.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!(
                    "{}: row {}: {name} value {field:?} is not a number",
                    path.display(),
                    i + 1
                ))
            })
        })
        .collect()
}

fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::InvalidArgument(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

// ---- spectra ----

pub const TRACE_HEADER: [&str; 2] = ["offset_hz", "power_dbm"];

#[derive(Debug, Deserialize)]
struct TraceRow {
    offset_hz: f64,
    power_dbm: f64,
}

pub fn write_trace_csv(path: &Path, trace: &SpectrumTrace) -> Result<()> {
    let rows = trace
        .frequency_offsets_hz
        .iter()
        .zip(&trace.powers_dbm)
        .map(|(&f, &p)| [fmt_f64(f), fmt_f64(p)]);
    write_atomic(path, &csv_bytes(&TRACE_HEADER, rows)?)
}

/// Reads one trace; parse failures surface as malformed-trace errors.
pub fn read_trace_csv(path: &Path, timestamp_s: f64) -> Result<SpectrumTrace> {
    let malformed = |reason: String| Error::MalformedTrace {
        index: None,
        reason: format!("{}: {reason}", path.display()),
    };
    let rows: Vec<TraceRow> = read_rows(path, &TRACE_HEADER).map_err(|e| match e {
        Error::Io(_) => e,
        other => malformed(other.to_string()),
    })?;
    let (offsets, powers) = rows.into_iter().map(|r| (r.offset_hz, r.power_dbm)).unzip();
    SpectrumTrace::new(offsets, powers, timestamp_s).map_err(|e| match e {
        Error::MalformedTrace { reason, .. } => malformed(reason),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory unless absolute.
    pub file: PathBuf,
    pub timestamp_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceManifest {
    pub traces: Vec<ManifestEntry>,
}

/// Loads every trace listed in a manifest, tagging failures with their index.
pub fn read_trace_series(manifest_path: &Path) -> Result<Vec<SpectrumTrace>> {
    let manifest: TraceManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .traces
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            read_trace_csv(&base.join(&entry.file), entry.timestamp_s).map_err(|e| match e {
                Error::MalformedTrace { reason, .. } => Error::MalformedTrace {
                    index: Some(i),
                    reason,
                },
                other => other,
            })
        })
        .collect()
}

/// Writes `trace_NNNN.csv` files plus `manifest.json` into `dir`; returns
/// the manifest path.
pub fn write_trace_series(dir: &Path, traces: &[SpectrumTrace]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut manifest = TraceManifest::default();
    for (i, trace) in traces.iter().enumerate() {
        let file = PathBuf::from(format!("trace_{i:04}.csv"));
        write_trace_csv(&dir.join(&file), trace)?;
        manifest.traces.push(ManifestEntry {
            file,
            timestamp_s: trace.timestamp_s,
        });
    }
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

// ---- classical sweeps ----

pub const SWEEP_HEADER: [&str; 2] = ["tau_s", "contrast_dbc"];
pub const DRIFT_HEADER: [&str; 3] = ["timestamp_s", "contrast_dbc", "tau_s"];

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| [fmt_f64(r.tau_s), fmt_f64(r.contrast_dbc)]);
    write_atomic(path, &csv_bytes(&SWEEP_HEADER, rows)?)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_rows(path, &SWEEP_HEADER)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCsvRow {
    pub timestamp_s: f64,
    pub contrast_dbc: f64,
    pub tau_s: f64,
}

pub fn write_drift_csv(path: &Path, rows: &[DriftRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        [
            fmt_f64(r.timestamp_s),
            fmt_f64(r.contrast_dbc),
            fmt_f64(r.tau_s),
        ]
    });
    write_atomic(path, &csv_bytes(&DRIFT_HEADER, rows)?)
}

pub fn read_drift_csv(path: &Path) -> Result<Vec<DriftCsvRow>> {
    read_rows(path, &DRIFT_HEADER)
}

// ---- joint spectral intensity ----

pub const JSI_HEADER: [&str; 3] = ["signal_bin", "idler_bin", "counts"];

/// Geometry needed to rebuild a [`JsiGrid`] from its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsiGeometry {
    pub bin_width_hz: f64,
    pub bin_spacing_hz: f64,
    pub integration_s: f64,
    pub signal_indices: Vec<i64>,
    pub idler_indices: Vec<i64>,
}

impl JsiGeometry {
    pub fn of(grid: &JsiGrid) -> Self {
        Self {
            bin_width_hz: grid.bin_width_hz,
            bin_spacing_hz: grid.bin_spacing_hz,
            integration_s: grid.integration_s,
            signal_indices: grid.signal_indices.clone(),
            idler_indices: grid.idler_indices.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct JsiRow {
    signal_bin: usize,
    idler_bin: usize,
    counts: f64,
}

/// One row per scan cell; bins are the 1-based scan positions.
pub fn write_jsi_csv(path: &Path, grid: &JsiGrid) -> Result<()> {
    let (rows, cols) = grid.shape();
    let cells = (0..rows).flat_map(|r| {
        (0..cols).map(move |c| {
            [
                (r + 1).to_string(),
                (c + 1).to_string(),
                fmt_f64(grid.counts[(r, c)]),
            ]
        })
    });
    write_atomic(path, &csv_bytes(&JSI_HEADER, cells)?)
}

pub fn read_jsi_csv(path: &Path, geometry: &JsiGeometry) -> Result<JsiGrid> {
    let (rows, cols) = (geometry.signal_indices.len(), geometry.idler_indices.len());
    let mut counts = DMatrix::from_element(rows, cols, f64::NAN);
    for row in read_rows::<JsiRow>(path, &JSI_HEADER)? {
        if !(1..=rows).contains(&row.signal_bin) || !(1..=cols).contains(&row.idler_bin) {
            return Err(Error::GridMismatch(format!(
                "cell ({}, {}) outside the {rows}x{cols} scan",
                row.signal_bin, row.idler_bin
            )));
        }
        let cell = &mut counts[(row.signal_bin - 1, row.idler_bin - 1)];
        if !cell.is_nan() {
            return Err(Error::GridMismatch(format!(
                "cell ({}, {}) appears twice",
                row.signal_bin, row.idler_bin
            )));
        }
        *cell = row.counts;
    }
    if counts.iter().any(|c| c.is_nan()) {
        return Err(Error::GridMismatch("scan has missing cells".into()));
    }
    JsiGrid::new(
        counts,
        geometry.bin_width_hz,
        geometry.bin_spacing_hz,
        geometry.integration_s,
        geometry.signal_indices.clone(),
        geometry.idler_indices.clone(),
    )
}

// ---- gate fidelity ----

pub const FIDELITY_HEADER: [&str; 3] = ["d", "omega_tau", "fidelity"];
pub const TOLERABLE_DELAY_HEADER: [&str; 3] = ["d", "threshold", "tau_s"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub d: usize,
    pub omega_tau: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerableDelayRow {
    pub d: usize,
    pub threshold: f64,
    pub tau_s: f64,
}

pub fn write_fidelity_csv(path: &Path, rows: &[FidelityRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| [r.d.to_string(), fmt_f64(r.omega_tau), fmt_f64(r.fidelity)]);
    write_atomic(path, &csv_bytes(&FIDELITY_HEADER, rows)?)
}

pub fn read_fidelity_csv(path: &Path) -> Result<Vec<FidelityRow>> {
    read_rows(path, &FIDELITY_HEADER)
}

pub fn write_tolerable_delay_csv(path: &Path, rows: &[TolerableDelayRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| [r.d.to_string(), fmt_f64(r.threshold), fmt_f64(r.tau_s)]);
    write_atomic(path, &csv_bytes(&TOLERABLE_DELAY_HEADER, rows)?)
}

pub fn read_tolerable_delay_csv(path: &Path) -> Result<Vec<TolerableDelayRow>> {
    read_rows(path, &TOLERABLE_DELAY_HEADER)
}

// ---- complex matrices ----

/// Row-major `[re, im]` pairs.
pub type ComplexRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &DMatrix<Complex64>) -> ComplexRows {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &ComplexRows) -> Result<DMatrix<Complex64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| {
        Complex64::new(rows[r][c][0], rows[r][c][1])
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTransformJson {
    pub in_grid: FrequencyGrid,
    pub out_grid: FrequencyGrid,
    pub matrix: ComplexRows,
}

impl From<&ModeTransform> for ModeTransformJson {
    fn from(t: &ModeTransform) -> Self {
        Self {
            in_grid: t.in_grid,
            out_grid: t.out_grid,
            matrix: matrix_to_rows(&t.matrix),
        }
    }
}

impl TryFrom<ModeTransformJson> for ModeTransform {
    type Error = Error;

    fn try_from(j: ModeTransformJson) -> Result<Self> {
        ModeTransform::new(rows_to_matrix(&j.matrix)?, j.in_grid, j.out_grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub dim: usize,
    pub entries: ComplexRows,
}

impl From<&DensityMatrix> for DensityMatrixJson {
    fn from(rho: &DensityMatrix) -> Self {
        Self {
            dim: rho.dim(),
            entries: matrix_to_rows(&rho.entries),
        }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(j: DensityMatrixJson) -> Result<Self> {
        let m = rows_to_matrix(&j.entries)?;
        if m.nrows() != j.dim {
            return Err(Error::InvalidDensityMatrix(format!(
                "declared dimension {} but {} rows",
                j.dim,
                m.nrows()
            )));
        }
        DensityMatrix::new(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            -0.0,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn complex_rows_are_row_major() {
        let m = DMatrix::from_row_slice(
            2,
            3,
            &[1., 2., 3., 4., 5., 6.].map(|x| Complex64::new(x, -x)),
        );
        let rows = matrix_to_rows(&m);
        assert_eq!(rows[0][2], [3.0, -3.0]);
        assert_eq!(rows[1][0], [4.0, -4.0]);
        assert_eq!(rows_to_matrix(&rows).unwrap(), m);
        assert!(rows_to_matrix(&vec![vec![[0.0; 2]; 2], vec![[0.0; 2]]]).is_err());
    }
}
