use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub label: String,
    pub q_final_hz: f64,
    pub rng_seed: u64,
}

/// Record of one CLI invocation. `config_ini` alone reproduces every data
/// file; `--config manifest.json` replays it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config_ini: String,
    /// Resolved configuration, for reading only.
    pub config: serde_json::Value,
    pub trajectories: Vec<TrajectoryEntry>,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
    pub jobs: usize,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
    root: PathBuf,
}

impl ManifestBuilder {
    pub fn new(command: &str, root: &Path, ini: &str, cfg: &RunConfig, jobs: usize) -> Result<Self> {
        let started_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let config = serde_json::to_value(cfg).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Self {
            manifest: RunManifest {
                command: command.into(),
                code_version: env!("CARGO_PKG_VERSION").into(),
                config_ini: ini.into(),
                config,
                trajectories: Vec::new(),
                outputs: Vec::new(),
                started_unix_s,
                wall_clock_s: 0.0,
                jobs,
            },
            started: Instant::now(),
            root: root.to_path_buf(),
        })
    }

    pub fn trajectory(&mut self, label: String, q_final_hz: f64, rng_seed: u64) {
        self.manifest.trajectories.push(TrajectoryEntry {
            label,
            q_final_hz,
            rng_seed,
        });
    }

    pub fn output(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        self.manifest.outputs.push(rel.to_string_lossy().into_owned());
    }

    /// Writes `manifest.json` into the output root and returns its path.
    pub fn finish(mut self) -> Result<(PathBuf, RunManifest)> {
        self.manifest.wall_clock_s = self.started.elapsed().as_secs_f64();
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Input(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Ok((path, self.manifest))
    }
}
