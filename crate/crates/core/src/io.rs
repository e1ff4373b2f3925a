//! CSV and JSON exchange formats.
//!
//! Floats are written with 17 significant digits so that files round-trip
//! exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyCurve;
use crate::extension::{AxiField, GridSpec};
use crate::fracops::{FracopsError, RadialTrace};
use crate::kelvin::MovingSphereReport;
use crate::model::Params;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    Header { path: PathBuf, expected: Vec<String>, found: Vec<String> },
    #[error("{path}, record {record}: {message}")]
    Parse { path: PathBuf, record: usize, message: String },
    #[error(transparent)]
    Trace(#[from] FracopsError),
}

/// `{:.16e}`, i.e. 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Path of the JSON sidecar next to a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), IoError> {
    let err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let found: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(IoError::Header {
            path: path.to_path_buf(),
            expected: header.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| IoError::Parse {
                    path: path.to_path_buf(),
                    record: k + 1,
                    message: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(row);
    }
    Ok(out)
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), IoError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    s.push('\n');
    fs::write(path, s).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, IoError> {
    let s = fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    serde_json::from_str(&s).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSidecar {
    pub beta_left: f64,
    pub beta_right: f64,
}

/// `r,u` plus `{beta_left, beta_right}` when the trace declares its tails.
pub fn write_trace(path: &Path, u: &RadialTrace<f64>) -> Result<(), IoError> {
    let rows = u.radii().iter().zip(u.values()).map(|(&r, &v)| vec![fmt_float(r), fmt_float(v)]);
    write_csv(path, &["r", "u"], rows)?;
    if let (Some(l), Some(r)) = (u.left_tail(), u.right_tail()) {
        write_json(&sidecar_path(path), &TailSidecar { beta_left: l.beta, beta_right: r.beta })?;
    }
    Ok(())
}

/// Reads a trace; with a sidecar the tails are declared and an interpolating
/// evaluator is attached.
pub fn read_trace(path: &Path) -> Result<RadialTrace<f64>, IoError> {
    let rows = read_csv(path, &["r", "u"])?;
    let (radii, values): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    let trace = RadialTrace::from_samples(radii, values)?;
    let side = sidecar_path(path);
    if side.exists() {
        let tails: TailSidecar = read_json(&side)?;
        return Ok(trace.with_tails(tails.beta_left, tails.beta_right).with_interpolant()?);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub inner_r: f64,
    pub outer_r: f64,
    pub nx: usize,
    pub nz: usize,
}

impl From<&GridSpec<f64>> for GridSidecar {
    fn from(g: &GridSpec<f64>) -> Self {
        Self { inner_r: g.inner_r, outer_r: g.outer_r, nx: g.mesh.nx, nz: g.mesh.nz }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub n: usize,
    pub sigma: f64,
    pub p: f64,
    pub grid_spec: Option<GridSidecar>,
    pub homogeneity: Option<f64>,
}

/// Sampled field as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSamples {
    pub points: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub meta: FieldSidecar,
}

/// `s,t,U` of the field's samples plus the sidecar.
pub fn write_field(path: &Path, u: &AxiField<f64>, params: &Params<f64>) -> Result<(), IoError> {
    let rows = u.points().iter().zip(u.values()).map(|(&(s, t), &v)| vec![fmt_float(s), fmt_float(t), fmt_float(v)]);
    write_csv(path, &["s", "t", "U"], rows)?;
    let meta = FieldSidecar {
        n: params.n(),
        sigma: params.sigma(),
        p: params.p(),
        grid_spec: u.grid_spec().map(GridSidecar::from),
        homogeneity: u.homogeneity(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_field(path: &Path) -> Result<FieldSamples, IoError> {
    let rows = read_csv(path, &["s", "t", "U"])?;
    let meta: FieldSidecar = read_json(&sidecar_path(path))?;
    let points = rows.iter().map(|r| (r[0], r[1])).collect();
    let values = rows.iter().map(|r| r[2]).collect();
    Ok(FieldSamples { points, values, meta })
}

/// `r,E,dE_formula,dE_fd,monotone_ok`; the flag of row `i` covers the interval
/// ending at `r_i` (always true on the first row).
pub fn write_energy_curve(path: &Path, c: &EnergyCurve<f64>) -> Result<(), IoError> {
    let rows = (0..c.radii.len()).map(|i| {
        let ok = if i == 0 { true } else { c.monotone_ok[i - 1] };
        vec![
            fmt_float(c.radii[i]),
            fmt_float(c.e_values[i]),
            fmt_float(c.de_formula[i]),
            fmt_float(c.de_fd[i]),
            ok.to_string(),
        ]
    });
    write_csv(path, &["r", "E", "dE_formula", "dE_fd", "monotone_ok"], rows)
}

/// One row of an energy-curve file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub r: f64,
    pub e: f64,
    pub de_formula: f64,
    pub de_fd: f64,
    pub monotone_ok: bool,
}

pub fn read_energy_curve(path: &Path) -> Result<Vec<EnergyRow>, IoError> {
    let err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let bad = |m: String| IoError::Parse { path: path.to_path_buf(), record: k + 1, message: m };
        if rec.len() != 5 {
            return Err(bad(format!("{} fields", rec.len())));
        }
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(e.to_string()));
        let ok = rec[4].parse::<bool>().map_err(|e| bad(e.to_string()))?;
        out.push(EnergyRow { r: f(0)?, e: f(1)?, de_formula: f(2)?, de_fd: f(3)?, monotone_ok: ok });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingSphereJson {
    pub center: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub deficits: Vec<f64>,
    pub lambda_bar: f64,
}

impl From<&MovingSphereReport<f64>> for MovingSphereJson {
    fn from(r: &MovingSphereReport<f64>) -> Self {
        Self {
            center: r.center.clone(),
            lambda_grid: r.lambda_grid.clone(),
            deficits: r.deficits.clone(),
            lambda_bar: r.lambda_bar,
        }
    }
}

pub fn write_moving_sphere(path: &Path, r: &MovingSphereReport<f64>) -> Result<(), IoError> {
    write_json(path, &MovingSphereJson::from(r))
}

pub fn read_moving_sphere(path: &Path) -> Result<MovingSphereJson, IoError> {
    read_json(path)
}
