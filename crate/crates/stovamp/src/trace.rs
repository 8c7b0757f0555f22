//! Trace persistence: one CSV row per solver step, preceded by comment lines
//! that make the file self-describing. `# key = value` lines echo the exact
//! configuration (parsing them back re-runs the experiment identically);
//! `## key = value` lines carry purely informational context such as the
//! realized sampling ratio or the final reconstruction error.
//!
//! Floating-point columns are written with 17 significant digits, so a
//! written-then-parsed trace reproduces every record bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::TraceRecord;

/// The CSV column header, in the order the solver fills records.
pub const TRACE_HEADER: &str = "iter,block,nmse_db,eta1,gamma1,tau1,wall_ms";

fn fmt_f64(value: f64) -> String {
    // 1 leading + 16 fractional significant digits: enough for f64 to
    // round-trip exactly through decimal.
    format!("{value:.16e}")
}

/// Renders echo pairs, info pairs, the header, and one row per record.
pub fn render_trace(
    records: &[TraceRecord],
    echo: &[(String, String)],
    info: &[(String, String)],
) -> String {
    let mut out = String::new();
    for (key, value) in echo {
        let _ = writeln!(out, "# {key} = {value}");
    }
    for (key, value) in info {
        let _ = writeln!(out, "## {key} = {value}");
    }
    let _ = writeln!(out, "{TRACE_HEADER}");
    for r in records {
        let nmse = r.nmse_db.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iteration,
            r.block,
            nmse,
            fmt_f64(r.eta1),
            fmt_f64(r.gamma1),
            fmt_f64(r.tau1),
            fmt_f64(r.wall_ms),
        );
    }
    out
}

/// Writes a trace CSV to disk; see [`render_trace`] for the layout.
pub fn write_trace(
    records: &[TraceRecord],
    path: &Path,
    echo: &[(String, String)],
    info: &[(String, String)],
) -> Result<()> {
    std::fs::write(path, render_trace(records, echo, info)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Everything a trace file contains: the records plus both comment blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    /// Config-echo pairs from the `# key = value` lines.
    pub echo: Vec<(String, String)>,
    /// Informational pairs from the `## key = value` lines.
    pub info: Vec<(String, String)>,
    /// The data rows, in file order.
    pub records: Vec<TraceRecord>,
}

fn comment_pair(body: &str) -> Option<(String, String)> {
    let (key, value) = body.split_once('=')?;
    Some((key.trim().to_string(), value.trim().to_string()))
}

/// Parses a trace file written by [`write_trace`]. Field mistakes are
/// reported with the byte offset of the offending line.
pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let path_str = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path_str.clone(),
        source,
    })?;
    let fail = |offset: usize, what: String| Error::Format {
        path: path_str.clone(),
        offset,
        what,
    };

    let mut echo = Vec::new();
    let mut info = Vec::new();
    let mut records = Vec::new();
    let mut seen_header = false;
    let mut offset = 0usize;
    for line in text.lines() {
        let here = offset;
        offset += line.len() + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix("## ") {
            let pair =
                comment_pair(body).ok_or_else(|| fail(here, "malformed ## comment".into()))?;
            info.push(pair);
            continue;
        }
        if let Some(body) = line.strip_prefix("# ") {
            let pair =
                comment_pair(body).ok_or_else(|| fail(here, "malformed # comment".into()))?;
            echo.push(pair);
            continue;
        }
        if !seen_header {
            if line != TRACE_HEADER {
                return Err(fail(here, format!("expected header `{TRACE_HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(fail(here, format!("expected 7 fields, got {}", fields.len())));
        }
        let parse_f = |what: &str, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| fail(here, format!("{what}: `{s}` is not a number")))
        };
        records.push(TraceRecord {
            iteration: fields[0]
                .parse()
                .map_err(|_| fail(here, format!("iter: `{}` is not an integer", fields[0])))?,
            block: fields[1]
                .parse()
                .map_err(|_| fail(here, format!("block: `{}` is not an integer", fields[1])))?,
            nmse_db: if fields[2].is_empty() {
                None
            } else {
                Some(parse_f("nmse_db", fields[2])?)
            },
            eta1: parse_f("eta1", fields[3])?,
            gamma1: parse_f("gamma1", fields[4])?,
            tau1: parse_f("tau1", fields[5])?,
            wall_ms: parse_f("wall_ms", fields[6])?,
        });
    }
    if !seen_header {
        return Err(fail(text.len(), "missing column header".into()));
    }
    Ok(TraceFile {
        echo,
        info,
        records,
    })
}
