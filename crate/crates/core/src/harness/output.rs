//! CSV tables and their JSON metadata sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Bumped whenever a CSV column changes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `results.csv` → `results.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata<C: Serialize, E: Serialize> {
    pub schema_version: u32,
    /// `sweep`, `nmse`, `complexity` or `verify-channel`.
    pub kind: &'static str,
    pub crate_version: &'static str,
    pub config_sha256: String,
    pub config: C,
    #[serde(flatten)]
    pub extra: E,
}

impl<C: Serialize, E: Serialize> Metadata<C, E> {
    pub fn new(kind: &'static str, config: C, extra: E) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind,
            crate_version: env!("CARGO_PKG_VERSION"),
            config_sha256: super::config::config_hash(&config)?,
            config,
            extra,
        })
    }
}

pub fn write_sidecar<T: Serialize>(csv: &Path, meta: &T) -> Result<PathBuf> {
    let path = sidecar_path(csv);
    std::fs::write(&path, serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(path)
}
