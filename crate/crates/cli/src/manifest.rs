use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use ipdg_qmc::{ExperimentConfig, Result};

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

/// Reproducibility record written next to every run's output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn start(command: &str, config: &ExperimentConfig, threads: usize, inputs: &[&Path]) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            seed: config.seed,
            threads,
            started_at: now(),
            finished_at: None,
            status: RunStatus::Running,
            error: None,
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            outputs: Vec::new(),
        })
    }

    pub fn finish(&mut self, outcome: std::result::Result<Vec<PathBuf>, String>) -> Result<()> {
        self.finished_at = Some(now());
        match outcome {
            Ok(outputs) => {
                self.status = RunStatus::Succeeded;
                self.outputs = outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?;
            }
            Err(msg) => {
                self.status = RunStatus::Failed;
                self.error = Some(msg);
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// Manifest path for an output table.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
