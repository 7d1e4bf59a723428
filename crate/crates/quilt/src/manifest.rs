//! Run manifests: what was run, on which inputs, with which seed, and how long it took.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

use crate::io::{bytes_digest, file_digest, write_json};

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command_line: Vec<String>,
    pub subcommand: String,
    /// SHA-256 of the compact JSON of the effective options.
    pub config_digest: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// Path as given → SHA-256 of the file bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings: Vec<Timing>,
    pub wall_seconds: f64,
}

/// Collects manifest fields while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
    phase_start: Instant,
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(subcommand: &str, config: &C, seed: Option<u64>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_digest = bytes_digest(serde_json::to_string(&config)?.as_bytes());
        let now = Instant::now();
        Ok(Self {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command_line: std::env::args().collect(),
                subcommand: subcommand.into(),
                config_digest,
                config,
                seed,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                timings: Vec::new(),
                wall_seconds: 0.0,
            },
            start: now,
            phase_start: now,
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.manifest.outputs.insert(name, file_digest(path)?);
        Ok(())
    }

    /// Closes the current phase under `name`.
    pub fn phase(&mut self, name: &str) {
        let now = Instant::now();
        self.manifest.timings.push(Timing { phase: name.into(), seconds: (now - self.phase_start).as_secs_f64() });
        self.phase_start = now;
    }

    pub fn write(mut self, path: &Path) -> Result<RunManifest> {
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        write_json(path, &self.manifest)?;
        Ok(self.manifest)
    }
}
