//! CSV and JSON forms of a trajectory.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use super::{IntegratorOptions, Trajectory};

/// CSV with the given three-column header, one row per sample, numbers at
/// 17 significant digits, and a trailing `# event: ...` comment line.
pub fn trajectory_csv(traj: &Trajectory, header: [&str; 3]) -> String {
    let mut out = String::with_capacity(64 * (traj.samples.len() + 2));
    let _ = writeln!(out, "{},{},{}", header[0], header[1], header[2]);
    for s in &traj.samples {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", s.r, s.u, s.du);
    }
    let _ = writeln!(out, "# event: {}", traj.event);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<[f64; 3]>,
    pub comments: Vec<String>,
}

pub fn read_csv(text: &str) -> Result<CsvTable, String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty csv")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() != 3 {
        return Err(format!("expected 3 columns, header has {}", header.len()));
    }
    let mut rows = Vec::new();
    let mut comments = Vec::new();
    for (i, line) in lines.enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 3];
        let mut n = 0;
        for (j, field) in line.split(',').enumerate() {
            if j >= 3 {
                return Err(format!("row {}: too many fields", i + 2));
            }
            row[j] = field.trim().parse().map_err(|e| format!("row {}: {e}", i + 2))?;
            n += 1;
        }
        if n != 3 {
            return Err(format!("row {}: expected 3 fields", i + 2));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows, comments })
}

/// JSON document `{problem, options, samples, event}`.
pub fn trajectory_json<P: Serialize>(problem: &P, opts: &IntegratorOptions, traj: &Trajectory) -> Value {
    json!({
        "problem": problem,
        "options": opts,
        "samples": traj.samples,
        "event": traj.event,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
    })
}
