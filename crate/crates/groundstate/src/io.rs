//! Bit-exact artifact formats: CSV field exports and JSON reports.
//!
//! All floats are written with 17 significant digits (`{:.16e}`), so identical
//! inputs produce byte-identical files on any platform or thread count.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::experiments::ContinuationTrace;
use crate::grid::{GridDomain, ScalarField};
use crate::inf::Branch;

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with one row per inside node, ordered by (y, then x) ascending.
pub fn field_csv(grid: &GridDomain, field: &ScalarField, value_name: &str) -> String {
    let mut out = String::with_capacity(64 * grid.inside_nodes().len() + 16);
    out.push_str(&format!("x,y,{value_name}\n"));
    for &n in grid.inside_nodes() {
        let (x, y) = grid.coords(n as usize);
        out.push_str(&format_f64(x));
        out.push(',');
        out.push_str(&format_f64(y));
        out.push(',');
        out.push_str(&format_f64(field[n as usize]));
        out.push('\n');
    }
    out
}

/// CSV of branch tags: 0=outside, 1=pinned, 2=harmonic, 3=gradient.
pub fn branch_csv(grid: &GridDomain, branches: &[Branch]) -> String {
    let mut out = String::from("x,y,branch\n");
    for &n in grid.inside_nodes() {
        let (x, y) = grid.coords(n as usize);
        out.push_str(&format_f64(x));
        out.push(',');
        out.push_str(&format_f64(y));
        out.push(',');
        out.push_str(&(branches[n as usize] as u8).to_string());
        out.push('\n');
    }
    out
}

pub fn trace_csv(trace: &ContinuationTrace) -> String {
    let mut out = String::from("parameter,lambda,residual,probe_left,probe_right,iterations,wall_time\n");
    for s in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_f64(s.parameter),
            format_f64(s.lambda),
            format_f64(s.residual),
            format_f64(s.probe_left),
            format_f64(s.probe_right),
            s.iterations,
            format_f64(s.wall_time),
        ));
    }
    out
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_string(path, &text)
}
