//! CSV tables: trajectories, phase records and thresholds.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::experiments::{PhaseRecord, Thresholds};

pub const TIMESERIES_HEADER: &str = "t_ns,mx_avg,my_avg,mz_avg,mx_short,my_long,E_ex_J,E_d_J,E_z_J";
pub const RECORDS_HEADER: &str = "material,J_Apm2,pulse_ns,final_state,t_switch_ns,t_switch_long_ns,note";
pub const THRESHOLDS_HEADER: &str = "material,Jc1_Apm2,Jc2_Apm2,anomaly";

/// Twelve significant digits in scientific notation.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt12(v: Option<f64>) -> String {
    v.map(fmt12).unwrap_or_default()
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn timeseries_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(160 * (traj.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let row = [
            s.t * 1e9,
            s.m_avg.x,
            s.m_avg.y,
            s.m_avg.z,
            s.short_avg.x,
            s.long_avg.y,
            s.energy.exchange,
            s.energy.demag,
            s.energy.zeeman,
        ];
        let cells: Vec<String> = row.iter().map(|&v| fmt12(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses a time-series table back into rows of nine numbers.
pub fn parse_timeseries(text: &str) -> Result<Vec<[f64; 9]>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TIMESERIES_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected time-series header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut row = [0.0; 9];
            let mut n = 0;
            for (k, cell) in line.split(',').enumerate() {
                if k >= 9 {
                    return Err(Error::Parse(format!("line {}: too many columns", i + 2)));
                }
                row[k] = cell
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: `{cell}`: {e}", i + 2)))?;
                n = k + 1;
            }
            if n != 9 {
                return Err(Error::Parse(format!("line {}: expected 9 columns, found {n}", i + 2)));
            }
            Ok(row)
        })
        .collect()
}

pub fn records_csv(records: &[PhaseRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            quote(&r.material),
            fmt12(r.j),
            fmt12(r.pulse * 1e9),
            r.final_state,
            opt12(r.t_switch.map(|t| t * 1e9)),
            opt12(r.t_switch_long.map(|t| t * 1e9)),
            quote(r.note.as_deref().unwrap_or("")),
        );
    }
    out
}

pub fn thresholds_csv(rows: &[Thresholds]) -> String {
    let mut out = String::from(THRESHOLDS_HEADER);
    out.push('\n');
    for t in rows {
        let _ = writeln!(out, "{},{},{},{}", quote(&t.material), opt12(t.jc1), opt12(t.jc2), t.anomaly);
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_timeseries(traj: &Trajectory, path: &Path) -> Result<()> {
    write_text(path, &timeseries_csv(traj))
}

pub fn write_records(records: &[PhaseRecord], path: &Path) -> Result<()> {
    write_text(path, &records_csv(records))
}

pub fn write_thresholds(rows: &[Thresholds], path: &Path) -> Result<()> {
    write_text(path, &thresholds_csv(rows))
}
