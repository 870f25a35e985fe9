//! Run provenance for every file the tool writes.
//!
//! JSON artifacts are wrapped as `{"meta": ..., <body key>: ...}` so the
//! version, seed, and configuration hash travel with the data. CSV and SVG
//! outputs cannot embed JSON, so they get a `<name>.meta.json` sidecar
//! (report bundles get a single `meta.json` for the whole directory).
//! Loaders also accept bare library checkpoints without a wrapper.

use std::path::{Path, PathBuf};

use fairgen::artifact::{sha256_hex, write_json};
use fairgen::bias::BiasReport;
use fairgen::cgan::{GanCheckpoint, GanState};
use fairgen::classifier::{ClassifierCheckpoint, EvalResult, TrainedClassifier};
use fairgen::Result;
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance block embedded in every artifact: which build produced it,
/// under which seed, from which resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl RunMeta {
    /// The hash covers the resolved configuration (inputs and settings, not
    /// output paths), so identical runs carry identical metadata.
    pub fn new(seed: u64, config: &impl Serialize) -> Result<RunMeta> {
        let canonical = serde_json::to_string(config)?;
        Ok(RunMeta {
            tool_version: TOOL_VERSION.to_owned(),
            seed,
            config_hash: sha256_hex(canonical.as_bytes())[..16].to_owned(),
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct AnalyzeArtifact {
    pub meta: RunMeta,
    pub report: BiasReport,
}

#[derive(Serialize, Deserialize)]
pub struct GanArtifact {
    pub meta: RunMeta,
    pub checkpoint: GanCheckpoint,
}

#[derive(Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub meta: RunMeta,
    pub checkpoint: ClassifierCheckpoint,
}

#[derive(Serialize, Deserialize)]
pub struct EvalArtifact {
    pub meta: RunMeta,
    pub results: Vec<EvalResult>,
}

/// `<file>.meta.json` next to an artifact that cannot embed provenance.
pub fn sidecar_path(primary: &Path) -> PathBuf {
    let name = primary
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{name}.meta.json"))
}

pub fn write_sidecar(primary: &Path, meta: &RunMeta) -> Result<PathBuf> {
    let path = sidecar_path(primary);
    write_json(&path, meta)?;
    Ok(path)
}

pub fn load_classifier_artifact(path: &Path) -> Result<TrainedClassifier> {
    let bytes = std::fs::read(path)?;
    if let Ok(wrapped) = serde_json::from_slice::<ClassifierArtifact>(&bytes) {
        return wrapped.checkpoint.into_classifier();
    }
    let bare: ClassifierCheckpoint = serde_json::from_slice(&bytes)?;
    bare.into_classifier()
}

pub fn load_gan_artifact(path: &Path) -> Result<GanState> {
    let bytes = std::fs::read(path)?;
    if let Ok(wrapped) = serde_json::from_slice::<GanArtifact>(&bytes) {
        return wrapped.checkpoint.into_state();
    }
    let bare: GanCheckpoint = serde_json::from_slice(&bytes)?;
    bare.into_state()
}
