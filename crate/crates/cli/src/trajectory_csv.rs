//! `trajectory.csv`: one row per sample.
//!
//! The first line is a `#` comment describing the layout. Then comes a header
//! row. Each data row holds `t`, then the `d⁴` matrix entries of the
//! superoperator in row-major order over vec indices (`vec(E_ij)` has index
//! `i + d·j`) as interleaved `re, im` pairs, then `unitality_residual` and
//! `trace_residual`. Floats use `{:.16e}`, 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nonmarkov::volterra::trace_preservation_residual;
use nonmarkov::{SuperOperator64, Trajectory64, TrajectoryKind};
use num_complex::Complex;

use crate::error::{CliError, Result};

const MAGIC: &str = "# nonmarkov trajectory";

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn header_comment(traj: &Trajectory64) -> String {
    let d = traj.dim();
    format!(
        "{MAGIC}; label={}; picture={}; d={d}; columns: t, S[r][c] re/im for r, c in 0..{} row-major (vec(E_ij) = i + d*j), unitality_residual, trace_residual",
        traj.kind().as_str(),
        if traj.is_dual() { "schrodinger" } else { "heisenberg" },
        d * d,
    )
}

fn column_names(d: usize) -> Vec<String> {
    let n = d * d;
    let mut cols = Vec::with_capacity(2 * n * n + 3);
    cols.push("t".to_owned());
    for r in 0..n {
        for c in 0..n {
            cols.push(format!("s{r}_{c}_re"));
            cols.push(format!("s{r}_{c}_im"));
        }
    }
    cols.push("unitality_residual".to_owned());
    cols.push("trace_residual".to_owned());
    cols
}

/// Writes every `stride`-th sample (the last one is always included).
pub fn write_trajectory(path: &Path, traj: &Trajectory64, stride: usize) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", header_comment(traj)).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Csv { path: path.to_path_buf(), message: e.to_string() };
    w.write_record(column_names(traj.dim())).map_err(csv_err)?;

    let last = traj.len() - 1;
    let stride = stride.max(1);
    let mut record: Vec<String> = Vec::new();
    for (i, (t, s)) in traj.times().iter().zip(traj.samples()).enumerate() {
        if i % stride != 0 && i != last {
            continue;
        }
        record.clear();
        record.push(format_float(*t));
        // nalgebra is column-major; walk rows explicitly
        let m = s.matrix();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                record.push(format_float(z.re));
                record.push(format_float(z.im));
            }
        }
        let unitality = (&s.apply_unit() - &nonmarkov::Operator64::identity(traj.dim())).norm();
        record.push(format_float(unitality));
        record.push(format_float(trace_preservation_residual(s)));
        w.write_record(&record).map_err(csv_err)?;
    }
    let mut out = w.into_inner().map_err(|e| CliError::Csv { path: path.to_path_buf(), message: e.to_string() })?;
    out.flush().map_err(|e| CliError::io(path, e))
}

struct Meta {
    kind: TrajectoryKind,
    dual: bool,
    dim: usize,
}

fn parse_meta(line: &str) -> Option<Meta> {
    let rest = line.strip_prefix(MAGIC)?;
    let (mut kind, mut dual, mut dim) = (None, None, None);
    for field in rest.split(';').map(str::trim) {
        if let Some(v) = field.strip_prefix("label=") {
            kind = TrajectoryKind::parse(v);
        } else if let Some(v) = field.strip_prefix("picture=") {
            dual = match v {
                "heisenberg" => Some(false),
                "schrodinger" => Some(true),
                _ => None,
            };
        } else if let Some(v) = field.strip_prefix("d=") {
            dim = v.parse().ok();
        }
    }
    Some(Meta { kind: kind?, dual: dual?, dim: dim? })
}

/// Reads a file produced by [`write_trajectory`]; residual columns are recomputed, not trusted.
pub fn read_trajectory(path: &Path) -> Result<Trajectory64> {
    let bad = |message: String| CliError::Csv { path: path.to_path_buf(), message };
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    let meta = parse_meta(first.trim_end()).ok_or_else(|| bad("missing or malformed layout comment".into()))?;

    let n = meta.dim * meta.dim;
    let expected_cols = 1 + 2 * n * n + 2;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != expected_cols {
            return Err(bad(format!("row {}: expected {expected_cols} columns, found {}", row + 1, rec.len())));
        }
        let value = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| bad(format!("row {}, column {}: {e}", row + 1, i + 1)))
        };
        times.push(value(0)?);
        let mut entries = Vec::with_capacity(n * n);
        for k in 0..n * n {
            entries.push(Complex::new(value(1 + 2 * k)?, value(2 + 2 * k)?));
        }
        let mat = nonmarkov::scalar::CMatrix::from_row_slice(n, n, &entries);
        samples.push(SuperOperator64::from_matrix(meta.dim, mat).map_err(|e| bad(e.to_string()))?);
    }
    Trajectory64::new(times, samples, meta.kind, meta.dual).map_err(|e| bad(e.to_string()))
}
