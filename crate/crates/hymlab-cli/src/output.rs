//! Output sinks: numeric CSV tables with a column schema, and JSON documents.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// A column-documented numeric table.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn column(&mut self, name: impl Into<String>, doc: impl Into<String>) -> &mut Self {
        self.columns.push((name.into(), doc.into()));
        self
    }

    /// Adds `prefix_1..prefix_r`, documenting each with `doc` and its index.
    pub fn indexed(&mut self, prefix: &str, r: usize, doc: &str) -> &mut Self {
        for k in 1..=r {
            self.column(format!("{prefix}_{k}"), format!("{doc} (k = {k})"));
        }
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|(n, _)| n.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_value(*v)))?;
        }
        w.flush()
    }

    pub fn schema(&self, title: &str) -> String {
        let mut s = format!("{title}\n\n");
        for (n, d) in &self.columns {
            s.push_str(&format!("{n}: {d}\n"));
        }
        s
    }
}

/// Shortest round-trip representation, so equal runs give identical bytes.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

/// JSON number that prints integral values without a fractional part.
pub fn json_number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
    }
}

pub fn json_numbers(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| json_number(*x)).collect())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Paths of the four files written by every run.
#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub series: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
    pub schema: PathBuf,
}

impl OutputPaths {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputPaths {
            dir: dir.to_path_buf(),
            series: dir.join("series.csv"),
            summary: dir.join("summary.json"),
            manifest: dir.join("manifest.json"),
            schema: dir.join("schema.txt"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_numbers_print_without_fraction() {
        assert_eq!(json_numbers(&[2.0, 0.0, -2.0, 0.5]).to_string(), "[2,0,-2,0.5]");
        assert_eq!(format_value(0.1), "0.1");
        assert_eq!(format_value(1e-300), "1e-300");
    }
}
