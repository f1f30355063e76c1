//! CSV ingestion and report serialization.
//!
//! Measures arrive as `x1,..,xd,weight` tables, cost matrices as dense
//! tables with index headers. Reports are rendered to strings first so the
//! byte-level output is easy to compare across runs; all floats use `{}`
//! formatting, which round-trips `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::measure::{CostMatrix, DiscreteMeasure, MeasureError};
use crate::solver::TransportPlan;
use crate::stats::{CltReport, RateReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure on {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: bad {field}: {detail}")]
    Parse {
        line: u64,
        field: String,
        detail: String,
    },
    #[error("bad header: expected {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn parse_field(raw: &str, line: u64, field: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| IoError::Parse {
        line,
        field: field.to_owned(),
        detail: format!("{raw:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(IoError::Parse {
            line,
            field: field.to_owned(),
            detail: format!("{v} is not finite"),
        });
    }
    Ok(v)
}

/// Read a measure from `x1,..,xd,weight` columns. Weights are
/// renormalized when their sum lies in `[0.999, 1.001]` and rejected
/// otherwise.
pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let d = headers.len().saturating_sub(1);
    let expected_ok = d >= 1
        && headers.iter().take(d).enumerate().all(|(k, h)| {
            h.trim() == format!("x{}", k + 1)
        })
        && headers.get(d).map(str::trim) == Some("weight");
    if !expected_ok {
        return Err(IoError::Header {
            expected: "x1,..,xd,weight".to_owned(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 1 {
            return Err(IoError::Parse {
                line,
                field: "record".to_owned(),
                detail: format!("expected {} fields, found {}", d + 1, record.len()),
            });
        }
        let mut atom = Vec::with_capacity(d);
        for (k, raw) in record.iter().take(d).enumerate() {
            atom.push(parse_field(raw, line, &format!("x{}", k + 1))?);
        }
        atoms.push(atom);
        weights.push(parse_field(record.get(d).unwrap(), line, "weight")?);
    }
    Ok(DiscreteMeasure::new_renormalizing(atoms, weights)?)
}

/// Read a dense cost table. The header row carries column indices
/// `0..cols` after an arbitrary corner label; each record starts with its
/// row index.
pub fn read_cost_csv(path: &Path) -> Result<CostMatrix> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(IoError::Header {
            expected: "corner label then column indices 0..m".to_owned(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let cols = headers.len() - 1;
    for (k, h) in headers.iter().skip(1).enumerate() {
        if h.trim().parse::<usize>() != Ok(k) {
            return Err(IoError::Header {
                expected: format!("column header {k}"),
                found: h.to_owned(),
            });
        }
    }
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols + 1 {
            return Err(IoError::Parse {
                line,
                field: "record".to_owned(),
                detail: format!("expected {} fields, found {}", cols + 1, record.len()),
            });
        }
        let label = record.get(0).unwrap().trim();
        if label.parse::<usize>() != Ok(rows) {
            return Err(IoError::Parse {
                line,
                field: "row index".to_owned(),
                detail: format!("expected {rows}, found {label:?}"),
            });
        }
        for (k, raw) in record.iter().skip(1).enumerate() {
            values.push(parse_field(raw, line, &format!("column {k}"))?);
        }
        rows += 1;
    }
    Ok(CostMatrix::from_table(values, rows, cols)?)
}

/// `side,index,value` rows: all of `f`, then all of `g`.
pub fn render_potentials_csv(f: &[f64], g: &[f64]) -> String {
    let mut out = String::from("side,index,value\n");
    for (i, v) in f.iter().enumerate() {
        let _ = writeln!(out, "f,{i},{v}");
    }
    for (j, v) in g.iter().enumerate() {
        let _ = writeln!(out, "g,{j},{v}");
    }
    out
}

/// `i,j,mass,density` rows in row-major order over the product support.
pub fn render_plan_csv(plan: &TransportPlan) -> String {
    let mut out = String::from("i,j,mass,density\n");
    for i in 0..plan.rows() {
        for j in 0..plan.cols() {
            let _ = writeln!(out, "{i},{j},{},{}", plan.mass(i, j), plan.density(i, j));
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per grid point; scalar fields repeat on every row, absent
/// optional fields are empty.
pub fn render_rate_report_csv(report: &RateReport) -> String {
    let mut out = String::from(
        "n_grid,mean_abs_error,bias,variance,fitted_slope,slope_stderr,seeds\n",
    );
    for (k, &n) in report.n_grid.iter().enumerate() {
        let _ = writeln!(
            out,
            "{n},{},{},{},{},{},{}",
            report.mean_abs_error[k],
            report.bias[k],
            report.variance[k],
            opt(report.fitted_slope),
            opt(report.slope_stderr),
            report.seeds
        );
    }
    out
}

/// One row per standardized replicate; experiment-level fields repeat on
/// every row, absent optional fields are empty.
pub fn render_clt_report_csv(report: &CltReport) -> String {
    let mut out = String::from(
        "mode,n,m,lambda,standardized,sigma_sq_exact,sigma_sq_plugin,ks_distance,centering\n",
    );
    let m = report.m.map(|m| m.to_string()).unwrap_or_default();
    for &z in &report.standardized {
        let _ = writeln!(
            out,
            "{},{},{m},{},{z},{},{},{},{}",
            report.mode.as_str(),
            report.n,
            opt(report.lambda),
            report.sigma_sq_exact,
            opt(report.sigma_sq_plugin),
            report.ks_distance,
            report.centering.as_str()
        );
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_potentials_csv(path: &Path, f: &[f64], g: &[f64]) -> Result<()> {
    write_text(path, &render_potentials_csv(f, g))
}

pub fn write_plan_csv(path: &Path, plan: &TransportPlan) -> Result<()> {
    write_text(path, &render_plan_csv(plan))
}

pub fn write_rate_report_csv(path: &Path, report: &RateReport) -> Result<()> {
    write_text(path, &render_rate_report_csv(report))
}

pub fn write_clt_report_csv(path: &Path, report: &CltReport) -> Result<()> {
    write_text(path, &render_clt_report_csv(report))
}
