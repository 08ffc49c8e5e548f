//! Run manifests.
//!
//! Every command writes `manifest.json` into the output directory, on
//! success and on failure alike. Manifests are byte-deterministic for a
//! fixed config and seed: artifact paths are recorded relative to the
//! output directory, JSON maps are ordered, and wall-clock timings are
//! zeroed unless explicitly requested.

use khessian::Result;
use serde::Serialize;
use std::fs;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Subcommand that produced this run.
    pub command: String,
    /// Crate version.
    pub version: String,
    /// Sampling seed (drives randomized test corpora only; solves are
    /// deterministic regardless).
    pub seed: u64,
    /// Requested worker threads (absent = library default).
    pub threads: Option<usize>,
    /// Echo of the parsed configuration (null for commands without one).
    pub config: serde_json::Value,
    /// Machine-readable outcome: "ok", "config-error", "nonconvergence",
    /// "certification-failure", or "selftest-failures".
    pub outcome: String,
    /// Human-readable failure description, when any.
    pub error: Option<String>,
    /// Paths of all emitted artifacts, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Command-specific report (fit results, solve diagnostics, ...).
    pub summary: serde_json::Value,
    /// Wall-clock seconds; zeroed by default so repeated runs are
    /// byte-identical.
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: Option<usize>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            config: serde_json::Value::Null,
            outcome: "ok".to_string(),
            error: None,
            artifacts: Vec::new(),
            summary: serde_json::Value::Null,
            wall_time_secs: 0.0,
        }
    }

    /// Serialize to `manifest.json` under `out`, creating the directory.
    pub fn write(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out)?;
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(out.join("manifest.json"), bytes)?;
        Ok(())
    }
}
