//! Structured JSON records written by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Legendre,
    Eigen,
    Bundle,
    Root,
    Gap,
    Variant,
    Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` only, so that
    /// repeated runs stay byte-identical.
    pub timestamp: Option<u64>,
    pub resolution_chain: Vec<(usize, usize)>,
}

impl Provenance {
    pub fn new(resolution_chain: Vec<(usize, usize)>) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok());
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            resolution_chain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub kind: Kind,
    pub key: String,
    pub payload: serde_json::Value,
    pub provenance: Provenance,
}

impl ResultRecord {
    pub fn new<T: Serialize>(
        kind: Kind,
        key: impl Into<String>,
        payload: &T,
        resolution_chain: Vec<(usize, usize)>,
    ) -> CliResult<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind,
            key: key.into(),
            payload: serde_json::to_value(payload)?,
            provenance: Provenance::new(resolution_chain),
        })
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(CliError::Output(format!(
                "unsupported schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let payload = vec![0.1f64, 1.0 / 3.0, 6.02214076e23, -2.2250738585072014e-308, 5e-324];
        let r = ResultRecord::new(Kind::Gap, "n=3", &payload, vec![(129, 129)]).unwrap();
        let back = ResultRecord::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let xs: Vec<f64> = serde_json::from_value(back.payload).unwrap();
        for (a, b) in xs.iter().zip(&payload) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn kind_names_are_lowercase() {
        let s = serde_json::to_string(&Kind::Variant).unwrap();
        assert_eq!(s, "\"variant\"");
    }
}
