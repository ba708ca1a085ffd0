// SPDX-License-Identifier: MIT OR Apache-2.0

//! Artifact file names, the run manifest, and read/write helpers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::PipelineError;

pub const FEATURES: &str = "features.json";
pub const SPREAD: &str = "spread.csv";
pub const IMPUTATION: &str = "imputation.csv";
pub const SOM_GRID: &str = "som_grid.json";
pub const MACRO_CLASSES: &str = "macro_classes.json";
pub const MS_FIT: &str = "ms_fit.json";
pub const REGIME_PROBABILITIES: &str = "regime_probabilities.json";
pub const SEGMENTATIONS: &str = "segmentations.json";
pub const MANIFEST: &str = "manifest.json";

pub const TABLE1: &str = "table1.csv";
pub const CLASS_MEANS: &str = "class_means.csv";
pub const FIG3: &str = "fig3_series.csv";

/// Every stage artifact the analysis can produce, in pipeline order.
pub const STAGE_ARTIFACTS: [&str; 7] = [
    FEATURES,
    SPREAD,
    SOM_GRID,
    MACRO_CLASSES,
    MS_FIT,
    REGIME_PROBABILITIES,
    SEGMENTATIONS,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub som: Option<u64>,
    pub msar: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub status: RunStatus,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// SHA-256 over the input bytes and every analysis parameter.
    pub run_hash: String,
    pub input_sha256: String,
    pub seeds: Seeds,
    pub weeks: usize,
    pub artifacts: Vec<ArtifactEntry>,
    /// Supporting files that are not stage outputs.
    pub auxiliary: Vec<ArtifactEntry>,
    pub created_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the input contents and the analysis parameters. Input and output
/// locations are excluded: moving files does not change the analysis.
pub fn run_hash(config: &RunConfig, input: &[u8]) -> String {
    let mut params = config.clone();
    params.input = None;
    params.out_dir = PathBuf::new();
    let mut hasher = Sha256::new();
    hasher.update(sha256_hex(input).as_bytes());
    hasher.update(b"\n");
    hasher.update(params.to_toml().as_bytes());
    hex::encode(hasher.finalize())
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, input: &[u8]) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: RunStatus::Complete,
            failed_stage: None,
            error: None,
            run_hash: run_hash(config, input),
            input_sha256: sha256_hex(input),
            seeds: Seeds {
                som: config.stages.som.then_some(config.som.seed),
                msar: config.stages.msar.then_some(config.msar.seed),
            },
            weeks: 0,
            artifacts: Vec::new(),
            auxiliary: Vec::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn artifact_files(&self) -> Vec<&str> {
        self.artifacts.iter().map(|a| a.file.as_str()).collect()
    }
}

/// Output directory plus the manifest being assembled for it.
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Bundle {
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir)
            .map_err(|e| PipelineError::io(format!("cannot create {}", dir.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn write_bytes(&self, file: &str, bytes: &[u8]) -> Result<ArtifactEntry, PipelineError> {
        let path = self.dir.join(file);
        fs::write(&path, bytes)
            .map_err(|e| PipelineError::io(format!("cannot write {}", path.display()), e))?;
        Ok(ArtifactEntry {
            file: file.to_string(),
            stage: String::new(),
            sha256: sha256_hex(bytes),
        })
    }

    /// Writes a stage artifact and records it in the manifest.
    pub fn put(&mut self, stage: &str, file: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let mut entry = self.write_bytes(file, bytes)?;
        entry.stage = stage.to_string();
        self.manifest.artifacts.push(entry);
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, stage: &str, file: &str, value: &T) -> Result<(), PipelineError> {
        self.put(stage, file, &to_json(value))
    }

    pub fn put_auxiliary(&mut self, stage: &str, file: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let mut entry = self.write_bytes(file, bytes)?;
        entry.stage = stage.to_string();
        self.manifest.auxiliary.push(entry);
        Ok(())
    }

    /// Deletes stage artifacts left over from earlier runs that this run did
    /// not produce, so the directory matches the manifest.
    pub fn remove_stale(&self) -> Result<(), PipelineError> {
        let produced = self.manifest.artifact_files();
        for file in STAGE_ARTIFACTS.iter().filter(|f| !produced.contains(f)) {
            let path = self.dir.join(file);
            if path.exists() {
                fs::remove_file(&path)
                    .map_err(|e| PipelineError::io(format!("cannot remove {}", path.display()), e))?;
            }
        }
        Ok(())
    }

    pub fn finish(&mut self) -> Result<(), PipelineError> {
        let bytes = to_json(&self.manifest);
        let path = self.dir.join(MANIFEST);
        fs::write(&path, bytes).map_err(|e| PipelineError::io(format!("cannot write {}", path.display()), e))
    }

    /// Records a stage failure in the manifest and writes it.
    pub fn fail(&mut self, err: &PipelineError) {
        self.manifest.status = RunStatus::Failed;
        self.manifest.failed_stage = err.stage().map(str::to_string);
        self.manifest.error = Some(err.to_string());
        // The original error is what the caller reports.
        let _ = self.finish();
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

/// Reads `dir/file`, reporting a missing file as "run `command` first".
pub fn read_artifact(dir: &Path, file: &str, command: &str) -> Result<Vec<u8>, PipelineError> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            file: path.display().to_string(),
            command: command.to_string(),
        });
    }
    fs::read(&path).map_err(|e| PipelineError::io(format!("cannot read {}", path.display()), e))
}

pub fn read_json<T: DeserializeOwned>(dir: &Path, file: &str, command: &str) -> Result<T, PipelineError> {
    let bytes = read_artifact(dir, file, command)?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::Artifact {
        path: dir.join(file).display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_hash_tracks_parameters_and_input() {
        let base = RunConfig::default();
        let h = run_hash(&base, b"abc");
        assert_eq!(h, run_hash(&base, b"abc"));
        assert_ne!(h, run_hash(&base, b"abd"));
        let mut other = base.clone();
        other.som.seed += 1;
        assert_ne!(h, run_hash(&other, b"abc"));
        let mut moved = base.clone();
        moved.out_dir = PathBuf::from("/elsewhere");
        moved.input = Some(PathBuf::from("x.csv"));
        assert_eq!(h, run_hash(&moved, b"abc"));
    }
}
