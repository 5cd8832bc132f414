//! Result files: observables and band CSV tables, the JSON summary and the
//! binary field snapshot.
//!
//! Floats in CSV files are written as `{:.16e}`, which round-trips every
//! `f64`.
//!
//! Snapshot layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size        field
//! 0       8           magic b"HOSCHSNP"
//! 8       4   u32     format version (1)
//! 12      4   u32     dims (1 or 2)
//! 16      8*dims u64  points per axis
//! ..      8*dims f64  box length per axis
//! ..      4   u32     dtype (1 = complex128 as interleaved re, im)
//! ..      8   f64     time
//! ..      16*N        samples, row-major (last axis fastest), re then im
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::bands::{BandEdge, FloquetChart};
use crate::diagnostics::{EhrenfestReport, ObservablesSample, SeparabilityReport};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"HOSCHSNP";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const DTYPE_COMPLEX128: u32 = 1;
pub const SUMMARY_FORMAT: &str = "hosch-summary";
pub const SUMMARY_VERSION: u32 = 1;

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(&r).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Observables table. 2D runs append `_y` columns after the common ones.
pub fn write_observables_csv(path: &Path, samples: &[ObservablesSample], dims: usize) -> Result<()> {
    let mut header = vec!["t", "norm", "E_L", "E_ME", "x_mean", "p_mean", "I1", "I2", "cont_residual"];
    if dims == 2 {
        header.extend(["x_mean_y", "p_mean_y", "I1_y", "I2_y"]);
    }
    write_table(
        path,
        &header,
        samples.iter().map(|s| {
            let mut row: Vec<String> = [
                s.t,
                s.norm,
                s.e_l,
                s.e_me,
                s.x_mean[0],
                s.p_mean[0],
                s.i1[0],
                s.i2[0],
                s.cont_residual,
            ]
            .into_iter()
            .map(fmt_f64)
            .collect();
            if dims == 2 {
                row.extend([s.x_mean[1], s.p_mean[1], s.i1[1], s.i2[1]].into_iter().map(fmt_f64));
            }
            row
        }),
    )
}

pub fn write_bands_csv(path: &Path, chart: &FloquetChart) -> Result<()> {
    write_table(
        path,
        &["spectral_parameter", "trM", "stable", "nu_real", "nu_imag"],
        chart.samples.iter().map(|r| {
            vec![
                fmt_f64(r.lambda),
                fmt_f64(r.trace),
                u8::from(r.stable).to_string(),
                fmt_f64(r.nu_real),
                fmt_f64(r.nu_imag),
            ]
        }),
    )
}

pub fn write_edges_csv(path: &Path, edges: &[BandEdge]) -> Result<()> {
    write_table(
        path,
        &["spectral_parameter", "kind", "tangent"],
        edges.iter().map(|e| {
            vec![
                fmt_f64(e.lambda),
                match e.kind {
                    crate::bands::EdgeKind::Periodic => "periodic".into(),
                    crate::bands::EdgeKind::Antiperiodic => "antiperiodic".into(),
                },
                u8::from(e.tangent).to_string(),
            ]
        }),
    )
}

pub fn write_ehrenfest_csv(path: &Path, rep: &EhrenfestReport) -> Result<()> {
    write_table(
        path,
        &["t", "r1", "r2", "r1_without_I1", "r2_without_I2"],
        (0..rep.times.len()).map(|i| {
            [rep.times[i], rep.r1[i], rep.r2[i], rep.r1_without_i1[i], rep.r2_without_i2[i]]
                .into_iter()
                .map(fmt_f64)
                .collect()
        }),
    )
}

pub fn write_separability_csv(path: &Path, rep: &SeparabilityReport) -> Result<()> {
    write_table(
        path,
        &["t", "deviation"],
        rep.times
            .iter()
            .zip(&rep.deviations)
            .map(|(t, d)| vec![fmt_f64(*t), fmt_f64(*d)]),
    )
}

pub fn write_snapshot(path: &Path, t: f64, psi: &ComplexField) -> Result<()> {
    let g = psi.grid;
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut head = Vec::new();
    head.extend_from_slice(SNAPSHOT_MAGIC);
    head.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    head.extend_from_slice(&(g.dims() as u32).to_le_bytes());
    for a in 0..g.dims() {
        head.extend_from_slice(&(g.n(a) as u64).to_le_bytes());
    }
    for a in 0..g.dims() {
        head.extend_from_slice(&g.len(a).to_le_bytes());
    }
    head.extend_from_slice(&DTYPE_COMPLEX128.to_le_bytes());
    head.extend_from_slice(&t.to_le_bytes());
    w.write_all(&head).map_err(io_err)?;
    for z in &psi.data {
        w.write_all(&z.re.to_le_bytes()).map_err(io_err)?;
        w.write_all(&z.im.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(b)
}

/// Reads a snapshot back as `(t, psi)`.
pub fn read_snapshot(path: &Path) -> Result<(f64, ComplexField)> {
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let bad = |m: &str| Error::Io(format!("{}: {m}", path.display()));
    if &take::<8>(&mut r)? != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file"));
    }
    if u32::from_le_bytes(take(&mut r)?) != SNAPSHOT_VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    let dims = u32::from_le_bytes(take(&mut r)?) as usize;
    if !(1..=2).contains(&dims) {
        return Err(bad("bad dimension count"));
    }
    let n: Vec<usize> = (0..dims)
        .map(|_| take(&mut r).map(|b| u64::from_le_bytes(b) as usize))
        .collect::<Result<_>>()?;
    let len: Vec<f64> = (0..dims)
        .map(|_| take(&mut r).map(f64::from_le_bytes))
        .collect::<Result<_>>()?;
    if u32::from_le_bytes(take(&mut r)?) != DTYPE_COMPLEX128 {
        return Err(bad("unsupported dtype"));
    }
    let t = f64::from_le_bytes(take(&mut r)?);
    let grid = Grid::with_axes(&n, &len)?;
    let data = (0..grid.size())
        .map(|_| {
            let re = f64::from_le_bytes(take(&mut r)?);
            let im = f64::from_le_bytes(take(&mut r)?);
            Ok(Complex64::new(re, im))
        })
        .collect::<Result<Vec<_>>>()?;
    if r.read(&mut [0u8; 1]).map_err(io_err)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok((t, ComplexField::from_vec(grid, data)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One pass/fail invariant with its measured value and bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            relation: Relation::AtMost,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            relation: Relation::AtLeast,
            tolerance,
            passed: measured >= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Machine-readable run report, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub format: &'static str,
    pub version: u32,
    pub command: String,
    pub status: Status,
    pub checks: Vec<CheckRecord>,
    /// Named scalar results that are not pass/fail.
    pub values: Vec<NamedValue>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        Self {
            format: SUMMARY_FORMAT,
            version: SUMMARY_VERSION,
            command: command.into(),
            status: Status::Pass,
            checks: Vec::new(),
            values: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
            error: None,
        }
    }

    pub fn push(&mut self, c: CheckRecord) {
        self.checks.push(c);
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push(NamedValue {
            name: name.into(),
            value: v,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn finalize(&mut self) {
        if self.status != Status::Aborted {
            self.status = if self.all_passed() { Status::Pass } else { Status::Fail };
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(io_err)?;
        text.push('\n');
        std::fs::write(path, text).map_err(io_err)
    }
}
