//! Deterministic plain-text output files.
//!
//! Every data file is a delimited table with a commented header carrying the
//! column names and units, the config hash and the code version, so any
//! plotting tool can consume it and any run can be traced back to its
//! configuration. Heatmaps store explicit axis vectors in the header and the
//! grid row-major. Data files are byte-identical across runs and thread
//! counts for identical config hashes; the manifest additionally records
//! wall time.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::Result;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn header(out: &mut String, title: &str, config_hash: &str, comments: &[String]) {
    out.push_str(&format!("# {title}\n"));
    out.push_str(&format!("# config_hash: {config_hash}\n"));
    out.push_str(&format!("# code_version: {CODE_VERSION}\n"));
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
}

/// Write a column table. All columns must have equal length.
pub fn write_table(
    path: &Path,
    title: &str,
    config_hash: &str,
    comments: &[String],
    columns: &[(&str, &[f64])],
) -> Result<()> {
    let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
    for (name, data) in columns {
        assert_eq!(data.len(), n, "column {name} length mismatch");
    }
    let mut out = String::new();
    header(&mut out, title, config_hash, comments);
    out.push_str("# columns: ");
    out.push_str(
        &columns
            .iter()
            .map(|(name, _)| name.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    for i in 0..n {
        let row = columns
            .iter()
            .map(|(_, data)| fmt(data[i]))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a heatmap: axis vectors in the header, values row-major (one line
/// per row of the first axis).
pub fn write_heatmap(
    path: &Path,
    title: &str,
    config_hash: &str,
    comments: &[String],
    row_axis: (&str, &[f64]),
    col_axis: (&str, &[f64]),
    value_name: &str,
    values: &[f64],
) -> Result<()> {
    assert_eq!(values.len(), row_axis.1.len() * col_axis.1.len());
    let mut out = String::new();
    header(&mut out, title, config_hash, comments);
    out.push_str(&format!("# layout: row-major, rows = {}, cols = {}\n", row_axis.0, col_axis.0));
    out.push_str(&format!("# value: {value_name}\n"));
    for (name, axis) in [row_axis, col_axis] {
        out.push_str(&format!("# axis {name}:"));
        for v in axis {
            out.push(' ');
            out.push_str(&fmt(*v));
        }
        out.push('\n');
    }
    let n_col = col_axis.1.len();
    for row in values.chunks(n_col) {
        let line = row.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" ");
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Magnitudes of a complex row.
pub fn magnitudes(row: &[Complex64]) -> Vec<f64> {
    row.iter().map(|v| v.norm()).collect()
}

/// Run manifest: config hash, code version, wall time, validity diagnostics
/// and the list of files the run produced.
pub struct Manifest {
    pub config_hash: String,
    pub wall_seconds: f64,
    pub validity_metric: f64,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.txt");
        let mut f = fs::File::create(&path)?;
        writeln!(f, "config_hash = {}", self.config_hash)?;
        writeln!(f, "code_version = {CODE_VERSION}")?;
        writeln!(f, "wall_seconds = {:.3}", self.wall_seconds)?;
        writeln!(f, "validity_metric = {:.6e}", self.validity_metric)?;
        writeln!(f, "validity_warning = {}", !self.warnings.is_empty())?;
        for w in &self.warnings {
            writeln!(f, "warning = {w}")?;
        }
        for file in &self.files {
            writeln!(f, "file = {}", file.display())?;
        }
        Ok(path)
    }
}
