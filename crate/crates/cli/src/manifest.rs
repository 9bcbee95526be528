//! Run manifests: every output file is accompanied by a JSON record of the
//! fully resolved configuration, seed set, and timing.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    /// FNV-1a hash of the resolved configuration JSON.
    pub config_hash: String,
    pub resolved_config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub seed_set: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub crate_version: String,
}

/// FNV-1a over bytes; stable across runs and platforms.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        config_path: Option<&Path>,
        resolved: &impl Serialize,
        outputs: Vec<PathBuf>,
        seed_set: Vec<u64>,
        elapsed: Duration,
    ) -> Self {
        let resolved_config = serde_json::to_value(resolved).expect("config serializes");
        let canonical = serde_json::to_string(&resolved_config).expect("canonical json");
        RunManifest {
            subcommand: subcommand.into(),
            config_path: config_path.map(|p| p.to_path_buf()),
            config_hash: fnv1a_hex(canonical.as_bytes()),
            resolved_config,
            outputs,
            seed_set,
            wall_clock_seconds: elapsed.as_secs_f64(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}_manifest.json", self.subcommand));
        std::fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes"))?;
        Ok(path)
    }
}
