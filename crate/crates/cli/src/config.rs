//! Flag, config-file and default resolution.
//!
//! Precedence is flags, then the config file, then defaults. The config file
//! is flat TOML: top-level keys only, values are numbers, strings or arrays
//! of numbers.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use thinobs_core::continuation::Resolution;
use thinobs_core::spectral::MIN_NODES;

use crate::error::{usage, CliError, CliResult};

pub const CACHE_ENV: &str = "THINOBS_CACHE_DIR";
pub const DEFAULT_OUT: &str = "thinobs-out";
pub const DEFAULT_NODES: usize = 129;
pub const DEFAULT_LEVELS: usize = 2;

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cache directory for evaluation records.
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["NX", "NPHI"])]
    pub resolution: Option<Vec<usize>>,
    /// Mesh levels for bisection.
    #[arg(long, value_name = "L")]
    pub levels: Option<usize>,
    /// Solver tolerance.
    #[arg(long, value_name = "T")]
    pub tol: Option<f64>,
    /// Flat TOML file with defaults for any of the above.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        for (k, v) in &table {
            let nested = match v {
                toml::Value::Table(_) => true,
                toml::Value::Array(a) => a.iter().any(|x| x.is_table() || x.is_array()),
                _ => false,
            };
            if nested {
                return Err(usage(format!("config key {k}: nested values are not allowed")));
            }
        }
        Ok(Self { table })
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| usage(format!("config key {key}: {e}"))),
        }
    }
}

/// First of flag and file value, else the default.
pub fn pick<T: DeserializeOwned>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> CliResult<T> {
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

/// A required value from flag or file.
pub fn require<T: DeserializeOwned>(flag: Option<T>, file: &FileConfig, key: &str) -> CliResult<T> {
    match flag {
        Some(v) => Ok(v),
        None => file.get(key)?.ok_or_else(|| usage(format!("missing required value --{}", key.replace('_', "-")))),
    }
}

/// Settings shared by every command, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub jobs: usize,
    pub resolution: Resolution,
    pub levels: usize,
    pub tol: Option<f64>,
    pub file: FileConfig,
}

impl RunConfig {
    pub fn resolve(c: &Common) -> CliResult<Self> {
        let file = match &c.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let out: PathBuf = pick(c.out.clone(), &file, "out", PathBuf::from(DEFAULT_OUT))?;
        let cache = match &c.cache {
            Some(p) => Some(p.clone()),
            None => match std::env::var_os(CACHE_ENV) {
                Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
                _ => file.get("cache")?,
            },
        };
        let default_jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        let jobs = pick(c.jobs, &file, "jobs", default_jobs)?;
        let (nx, nphi) = match &c.resolution {
            Some(v) => (v[0], v[1]),
            None => (
                pick(None, &file, "nx", DEFAULT_NODES)?,
                pick(None, &file, "nphi", DEFAULT_NODES)?,
            ),
        };
        let levels = pick(c.levels, &file, "levels", DEFAULT_LEVELS)?;
        let tol: Option<f64> = match c.tol {
            Some(t) => Some(t),
            None => file.get("tol")?,
        };

        if jobs == 0 {
            return Err(usage("--jobs must be positive"));
        }
        if nx < MIN_NODES || nphi < MIN_NODES {
            return Err(usage(format!("resolution must be at least {MIN_NODES} per axis")));
        }
        if levels == 0 {
            return Err(usage("--levels must be at least 1"));
        }
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(usage("--tol must be positive"));
            }
        }
        ensure_writable(&out)?;
        Ok(Self {
            out,
            cache,
            jobs,
            resolution: Resolution { nx, nphi },
            levels,
            tol,
            file,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn ensure_writable(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let probe = dir.join(format!(".write-probe-{}", std::process::id()));
    std::fs::write(&probe, b"").map_err(|e| CliError::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let (dir, p) = file_with("levels = 3\ntol = 1e-8\nnx = 65\nnphi = 65\n");
        let c = Common {
            out: Some(dir.path().join("o")),
            levels: Some(4),
            config: Some(p),
            ..Default::default()
        };
        let r = RunConfig::resolve(&c).unwrap();
        assert_eq!(r.levels, 4);
        assert_eq!(r.tol, Some(1e-8));
        assert_eq!(r.resolution, Resolution::square(65));
    }

    #[test]
    fn nested_tables_rejected() {
        let (_d, p) = file_with("[solver]\ntol = 1e-8\n");
        assert!(matches!(FileConfig::load(&p), Err(CliError::Usage(_))));
    }

    #[test]
    fn small_resolution_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let c = Common {
            out: Some(dir.path().to_path_buf()),
            resolution: Some(vec![8, 129]),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&c), Err(CliError::Usage(_))));
    }
}
