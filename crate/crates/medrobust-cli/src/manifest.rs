//! Run manifests: every report file is accompanied by a manifest recording
//! the command, the fully resolved configuration, the seed, the software
//! version, wall time, and a numeric diagnostics summary.
//!
//! The manifest is a sibling file rather than a field of the report because
//! wall time varies between runs while reports must be byte-identical for
//! identical inputs and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use medrobust::error::Result;

use crate::common::{to_canonical_json, write_text};

#[derive(Debug, serde::Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub wall_time_seconds: f64,
    /// Numeric health counters aggregated over everything the run computed.
    pub diagnostics: BTreeMap<String, f64>,
    /// Files this manifest accompanies, relative to the manifest directory.
    pub outputs: Vec<String>,
}

/// Collects manifest fields while a command runs, then writes the manifest
/// next to the outputs it describes.
pub struct ManifestBuilder {
    command: String,
    seed: Option<u64>,
    config: serde_json::Value,
    diagnostics: BTreeMap<String, f64>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            seed,
            config,
            diagnostics: BTreeMap::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn record_diagnostic(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.into(), value);
    }

    pub fn merge_diagnostics(&mut self, map: &BTreeMap<String, f64>) {
        for (k, v) in map {
            // Counters add up; extrema keep the worst value seen.
            let entry = self.diagnostics.entry(k.clone()).or_insert(match k.as_str() {
                "min_divisor" => f64::INFINITY,
                _ => 0.0,
            });
            *entry = match k.as_str() {
                "min_divisor" => entry.min(*v),
                "max_weight" => entry.max(*v),
                _ => *entry + *v,
            };
        }
    }

    /// Write `report_text` to `dir/name`, tracking it as a manifest output.
    pub fn emit(&mut self, dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        write_text(&path, text)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Write the manifest itself as `dir/<command>_manifest.json`.
    pub fn finish(self, dir: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: self.seed,
            config: self.config,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            diagnostics: self.diagnostics,
            outputs: self
                .outputs
                .iter()
                .map(|p| {
                    p.file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.display().to_string())
                })
                .collect(),
        };
        let path = dir.join(format!("{}_manifest.json", self.command));
        write_text(&path, &to_canonical_json(&manifest)?)?;
        Ok(path)
    }
}
