//! CSV tables and JSON files in the output directory.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::RunError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A column-oriented table; the first column is written first.
#[derive(Debug, Default)]
pub struct Table {
    columns: Vec<(String, Vec<String>)>,
}

impl Table {
    pub fn new() -> Self {
        Table::default()
    }

    pub fn real(mut self, name: &str, values: &[f64]) -> Self {
        self.columns.push((name.to_string(), values.iter().map(|v| fmt_f64(*v)).collect()));
        self
    }

    pub fn int(mut self, name: &str, values: impl IntoIterator<Item = usize>) -> Self {
        self.columns.push((name.to_string(), values.into_iter().map(|v| v.to_string()).collect()));
        self
    }

    pub fn text(mut self, name: &str, values: impl IntoIterator<Item = String>) -> Self {
        self.columns.push((name.to_string(), values.into_iter().collect()));
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let rows = self.rows();
        if let Some((name, _)) = self.columns.iter().find(|c| c.1.len() != rows) {
            return Err(RunError::Config(format!("column {name} is ragged")));
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|c| c.0.as_str()))?;
        for r in 0..rows {
            w.write_record(self.columns.iter().map(|c| c.1[r].as_str()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
