//! Numeric tables and their on-disk forms.
//!
//! CSV floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every `f64`, so a verdict recomputed from a stored file sees
//! exactly the values the run saw.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("{}.{}", self.name, format.extension())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, RunError> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| RunError::Audit(format!("table {} has no column {name}", self.name)))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write(&self, dir: &Path, format: Format) -> Result<String, RunError> {
        let file = self.file_name(format);
        let mut out = BufWriter::new(File::create(dir.join(&file))?);
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
                }
                w.flush()?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(file)
    }

    pub fn read(dir: &Path, name: &str, format: Format) -> Result<Table, RunError> {
        let path = dir.join(format!("{name}.{}", format.extension()));
        match format {
            Format::Csv => {
                let mut r = csv::Reader::from_path(&path)?;
                let columns = r.headers()?.iter().map(str::to_string).collect();
                let mut rows = Vec::new();
                for rec in r.records() {
                    let rec = rec?;
                    let row = rec
                        .iter()
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|e| RunError::Audit(format!("{}: bad number {s:?}: {e}", path.display())))
                        })
                        .collect::<Result<Vec<f64>, _>>()?;
                    rows.push(row);
                }
                Ok(Table {
                    name: name.to_string(),
                    columns,
                    rows,
                })
            }
            Format::Json => Ok(serde_json::from_reader(File::open(&path)?)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("x", &["t", "v"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![f64::MIN_POSITIVE, -2.5e300]);
        for format in [Format::Csv, Format::Json] {
            t.write(dir.path(), format).unwrap();
            let back = Table::read(dir.path(), "x", format).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("y", &["a"]);
        t.push(vec![0.1]);
        t.write(dir.path(), Format::Csv).unwrap();
        let text = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
        assert_eq!(text, "a\n1.0000000000000001e-1\n");
    }
}
