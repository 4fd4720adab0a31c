//! CSV output for fields, diagnostics and contours, and the JSON run manifest.
//! Floats are written in their shortest round-trip form (see [`format_float`]),
//! so identical runs give identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::contour::LevelSet;
use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{Field, MAX_DIM};
use crate::rescaled::RescaledRecord;
use crate::solver::RunDiagnostics;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn num(x: f64) -> String {
    format_float(x)
}

/// One row per node in storage order: coordinates, then the value.
pub fn write_field_csv<W: Write>(f: &Field, w: W) -> Result<()> {
    let dim = f.grid.dim();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    out.write_record(&header).map_err(csv_err)?;
    let mut x = [0.0; MAX_DIM];
    let mut row = Vec::with_capacity(dim + 1);
    for k in 0..f.grid.len() {
        f.grid.node_coords(k, &mut x);
        row.clear();
        row.extend(x[..dim].iter().map(|c| num(*c)));
        row.push(num(f.values[k]));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_field_csv`]; the nodes must form a grid centred at the origin.
pub fn read_field_csv<R: std::io::Read>(r: R) -> Result<Field> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    let dim = header.len().checked_sub(1).filter(|d| (1..=MAX_DIM).contains(d)).ok_or_else(|| {
        Error::Io(format!("field CSV needs 2..={} columns, got {}", MAX_DIM + 1, header.len()))
    })?;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Io(format!("row {}: `{s}` is not a number", i + 2))))
            .collect::<Result<_>>()?;
        if row.len() != dim + 1 {
            return Err(Error::Io(format!("row {} has {} fields", i + 2, row.len())));
        }
        values.push(row[dim]);
        coords.push(row[..dim].to_vec());
    }
    let mut extent = Vec::with_capacity(dim);
    let mut points = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut c: Vec<f64> = coords.iter().map(|x| x[a]).collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        extent.push(c.last().copied().unwrap_or(0.0));
        points.push(c.len());
    }
    let grid = crate::grid::Grid::new(extent, points)?;
    if grid.len() != values.len() {
        return Err(Error::Io(format!("{} rows do not fill a {:?} grid", values.len(), grid.points())));
    }
    let mut x = [0.0; MAX_DIM];
    for (k, row) in coords.iter().enumerate() {
        grid.node_coords(k, &mut x);
        let tol = 1e-9 * grid.extent().iter().cloned().fold(1.0, f64::max);
        if row.iter().zip(&x).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::Io(format!("row {} is not at node {k} of a centred grid", k + 2)));
        }
    }
    Ok(Field { grid, values, time: 0.0 })
}

pub fn write_diagnostics_csv<W: Write>(d: &RunDiagnostics, w: W) -> Result<()> {
    let n = d.m.len();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["time".to_string(), "steps".into(), "mass".into(), "linf".into()];
    header.extend(d.lp_exponents.iter().map(|p| format!("l{p}")));
    header.push("min".into());
    header.extend((0..n).map(|i| format!("energy{i}")));
    header.extend((0..n).map(|i| format!("power{i}")));
    header.push("boundary_flux".into());
    out.write_record(&header).map_err(csv_err)?;
    for r in &d.records {
        let mut row = vec![num(r.time), r.steps.to_string(), num(r.mass), num(r.linf)];
        row.extend(r.lp.iter().map(|x| num(*x)));
        row.push(num(r.min));
        row.extend(r.energy.iter().map(|x| num(*x)));
        row.extend(r.power_integrals.iter().map(|x| num(*x)));
        row.push(num(r.boundary_flux));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rescaled_csv<W: Write>(records: &[RescaledRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tau", "steps", "mass", "linf", "min", "increment_rate"]).map_err(csv_err)?;
    for r in records {
        out.write_record([num(r.tau), r.steps.to_string(), num(r.mass), num(r.linf), num(r.min), num(r.increment_rate)])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per polyline vertex.
pub fn write_contours_csv<W: Write>(ls: &LevelSet, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["level", "polyline", "vertex", "x0", "x1", "closed"]).map_err(csv_err)?;
    for c in &ls.contours {
        for (j, p) in c.polylines.iter().enumerate() {
            for (k, q) in p.points.iter().enumerate() {
                out.write_record([num(c.level), j.to_string(), k.to_string(), num(q[0]), num(q[1]), p.closed.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Write through `f` into `dir/name`, creating `dir`.
pub fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    f(&mut buf)?;
    let path = dir.join(name);
    fs::write(&path, &buf)?;
    Ok(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub exponents: ExponentSet,
    /// SHA-256 over the command, the version and the config echo.
    pub input_hash: String,
    pub threads: usize,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<CheckOutcome>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// Fitted smoothing constant `sup_t t^alpha ||u||_inf M^{-2 alpha / N}`, when the run allows a fit.
    #[serde(default)]
    pub c1_estimate: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, threads: usize) -> Result<Self> {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let echo = serde_json::to_vec(config).map_err(|e| Error::Io(e.to_string()))?;
        let mut h = Vec::new();
        h.extend_from_slice(command.as_bytes());
        h.push(0);
        h.extend_from_slice(version.as_bytes());
        h.push(0);
        h.extend_from_slice(&echo);
        Ok(Self {
            version,
            command: command.into(),
            config: config.clone(),
            exponents: config.exponents()?,
            input_hash: sha256_hex(&h),
            threads,
            outputs: Vec::new(),
            checks: Vec::new(),
            timings: BTreeMap::new(),
            c1_estimate: None,
        })
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(OutputFile { path: name, sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        write_file(dir, "manifest.json", |buf| {
            serde_json::to_writer_pretty(&mut *buf, self).map_err(|e| Error::Io(e.to_string()))?;
            buf.push(b'\n');
            Ok(())
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn field_csv_layout() {
        let g = Grid::new(vec![1.0, 2.0], vec![3, 3]).unwrap();
        let f = Field::from_fn(g, |x| x[0] + 0.5 * x[1]);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "x0,x1,value");
        assert_eq!(lines[1], "-1,-2,-2");
        assert_eq!(lines[9], "1,2,2");
        let back = read_field_csv(text.as_bytes()).unwrap();
        assert_eq!(back.values, f.values);
        assert!(back.grid.same_shape(&f.grid));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-4, 9.99e-5, 3.961412622120117e-121, 1.5e15, 123456.789, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(3.961412622120117e-121), "3.961412622120117e-121");
        assert_eq!(format_float(0.25), "0.25");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_hash_tracks_config() {
        let a = RunManifest::new("evolve", &RunConfig::default(), 1).unwrap();
        let b = RunManifest::new("evolve", &RunConfig::default(), 4).unwrap();
        assert_eq!(a.input_hash, b.input_hash);
        let mut c = RunConfig::default();
        c.solver.t_end = 2.0;
        assert_ne!(RunManifest::new("evolve", &c, 1).unwrap().input_hash, a.input_hash);
    }
}
