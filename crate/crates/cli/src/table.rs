//! CSV tables with shortest round-trip floats.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        crate::record::write_atomic(path, &bytes)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.iter().map(|s| s.to_string()).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(|s| s.to_string()).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Output(format!("missing column {name}")))
    }

    pub fn floats(&self, name: &str) -> CliResult<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| CliError::Output(format!("column {name}: {e}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let xs = [0.1, 1.0 / 3.0, 1e-300, -7.25, f64::MAX];
        let mut t = Table::new(&["x"]);
        for x in xs {
            t.push(vec![fmt(x)]);
        }
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap().floats("x").unwrap();
        for (a, b) in back.iter().zip(xs) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
