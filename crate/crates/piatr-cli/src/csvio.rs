//! CSV persistence for traces and viscosity paths. Floats carry 17
//! significant digits so a written trace round-trips bitwise; absent
//! values are written as `nan`.

use nalgebra::DVector;
use piatr::solver::Trace;
use piatr::tikhonov::PathPoint;
use thiserror::Error;

pub const TRACE_HEADER: &str = "k,fgap,vel,subgrad,xnorm,dist_xstar";
pub const PATH_HEADER: &str = "k,eps,center_norm,dist_xstar";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("empty file")]
    Empty,
    #[error("expected header `{expected}`, got `{got}`")]
    Header { expected: &'static str, got: String },
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), fmt)
}

pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.records.len() * 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k,
            fmt_opt(r.fgap),
            fmt(r.vel),
            fmt_opt(r.subgrad_norm),
            fmt(r.xnorm),
            fmt_opt(r.dist_xstar),
        ));
    }
    out
}

pub fn path_to_csv(points: &[PathPoint], xstar: Option<&DVector<f64>>) -> String {
    let mut out = String::with_capacity(points.len() * 48);
    out.push_str(PATH_HEADER);
    out.push('\n');
    for p in points {
        let dist = xstar.map(|s| (&p.center - s).norm());
        out.push_str(&format!("{},{},{},{}\n", p.k, fmt(p.eps), fmt(p.center_norm), fmt_opt(dist)));
    }
    out
}

/// One parsed trace row; `None` where the file holds `nan`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub fgap: Option<f64>,
    pub vel: f64,
    pub subgrad: Option<f64>,
    pub xnorm: f64,
    pub dist_xstar: Option<f64>,
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(CsvError::Empty)?;
    if header != TRACE_HEADER {
        return Err(CsvError::Header { expected: TRACE_HEADER, got: header.into() });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CsvError::Row { line: i + 2, reason: format!("expected 6 fields, got {}", fields.len()) });
        }
        let bad = |reason: String| CsvError::Row { line: i + 2, reason };
        let f = |s: &str| -> Result<f64, CsvError> {
            s.parse().map_err(|_| bad(format!("cannot parse `{s}`")))
        };
        let opt = |s: &str| -> Result<Option<f64>, CsvError> {
            if s == "nan" {
                Ok(None)
            } else {
                f(s).map(Some)
            }
        };
        rows.push(TraceRow {
            k: fields[0].parse().map_err(|_| bad(format!("cannot parse k `{}`", fields[0])))?,
            fgap: opt(fields[1])?,
            vel: f(fields[2])?,
            subgrad: opt(fields[3])?,
            xnorm: f(fields[4])?,
            dist_xstar: opt(fields[5])?,
        });
    }
    if rows.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok(rows)
}
