//! CSV and JSON artifacts with fixed formatting.

use std::path::{Path, PathBuf};

use crate::CliError;

/// Seventeen significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x == 0.0 {
        format!("{:.16e}", 0.0)
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn int(x: impl std::fmt::Display) -> String {
    x.to_string()
}

/// Stopping times print `inf` for the `t → ∞` sentinel.
pub fn steps(t: u64) -> String {
    if t == gdrisk_core::T_INFINITY {
        "inf".into()
    } else {
        t.to_string()
    }
}

pub fn flag(b: bool) -> String {
    b.to_string()
}

/// In-memory table written in one go.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[&'static str] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Ok(())
    }
}

/// `(x, y, yerr)` series for plotting.
pub fn plot_table(points: impl IntoIterator<Item = (f64, f64, f64)>) -> Table {
    let mut t = Table::new(&["x", "y", "yerr"]);
    for (x, y, e) in points {
        t.push(vec![real(x), real(y), real(e)]);
    }
    t
}

/// Files produced by one run, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<(String, Table)>,
    pub json: Vec<(String, serde_json::Value)>,
}

impl Artifacts {
    pub fn table(&mut self, name: impl Into<String>, table: Table) {
        self.tables.push((name.into(), table));
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        let mut written = Vec::new();
        for (name, table) in &self.tables {
            let path = dir.join(name);
            table.write(&path)?;
            written.push(path);
        }
        for (name, value) in &self.json {
            let path = dir.join(name);
            write_json(&path, value)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}
