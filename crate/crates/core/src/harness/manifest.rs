use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::store::{read_json, write_json, SetManifest};
use crate::error::{Error, Result};
use crate::landscape::CurveFile;

pub const MANIFEST: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Config,
    SetManifest,
    Curve,
    CurveProfile,
    Attributions,
    Results,
    Summary,
    Accuracy,
    Ablation,
    Toy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: ArtifactKind,
    /// Relative to the output directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstituentCount {
    pub strategy: String,
    pub n: usize,
    pub constituents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub set_hash: String,
    pub master_seed: u64,
    pub artifacts: Vec<Artifact>,
    pub stages: Vec<StageTiming>,
    #[serde(default)]
    pub constituent_counts: Vec<ConstituentCount>,
}

impl RunManifest {
    pub fn new(config_hash: String, set_hash: String, master_seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash,
            set_hash,
            master_seed,
            artifacts: Vec::new(),
            stages: Vec::new(),
            constituent_counts: Vec::new(),
        }
    }

    /// The manifest already in `out` when it belongs to the same config, a fresh one otherwise.
    pub fn open(out: &Path, config_hash: &str, set_hash: &str, master_seed: u64) -> Self {
        match Self::load(out) {
            Ok(m) if m.config_hash == config_hash => m,
            _ => Self::new(config_hash.to_string(), set_hash.to_string(), master_seed),
        }
    }

    pub fn load(out: &Path) -> Result<Self> {
        read_json(&out.join(MANIFEST))
    }

    pub fn save(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join(MANIFEST);
        write_json(&path, self)?;
        Ok(path)
    }

    /// Record an artifact; `path` may be absolute under `out` or already relative.
    pub fn add(&mut self, out: &Path, kind: ArtifactKind, path: &Path) {
        let rel = path.strip_prefix(out).unwrap_or(path).to_path_buf();
        if let Some(a) = self.artifacts.iter_mut().find(|a| a.path == rel) {
            a.kind = kind;
        } else {
            self.artifacts.push(Artifact { kind, path: rel });
        }
    }

    pub fn add_all(&mut self, out: &Path, kind: ArtifactKind, paths: &[PathBuf]) {
        for p in paths {
            self.add(out, kind, p);
        }
    }

    pub fn stage(&mut self, stage: &str, seconds: f64) {
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds,
        });
    }

    /// Every listed artifact exists and parses as its kind.
    pub fn validate(&self, out: &Path) -> Result<()> {
        for a in &self.artifacts {
            let path = out.join(&a.path);
            if !path.exists() {
                return Err(Error::MissingArtifact(path.display().to_string()));
            }
            match a.kind {
                ArtifactKind::Config => {
                    super::config::ExperimentConfig::load(&path)?;
                }
                ArtifactKind::SetManifest => {
                    read_json::<SetManifest>(&path)?;
                    super::store::validate_set_dir(path.parent().unwrap_or(out))?;
                }
                ArtifactKind::Curve => {
                    read_json::<CurveFile>(&path)?.into_curve()?;
                }
                _ => validate_csv(&path)?,
            }
        }
        Ok(())
    }
}

/// Header present and every record as wide as the header.
fn validate_csv(path: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let width = reader
        .headers()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
        .len();
    if width == 0 {
        return Err(Error::Validation(format!("{}: empty header", path.display())));
    }
    for record in reader.records() {
        let record = record.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        if record.len() != width {
            return Err(Error::Validation(format!("{}: ragged row", path.display())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_missing_and_malformed_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        std::fs::write(out.join("results.csv"), "a,b\n1,2\n").unwrap();
        let mut m = RunManifest::new("h".into(), "s".into(), 0);
        m.add(out, ArtifactKind::Results, &out.join("results.csv"));
        m.add(out, ArtifactKind::Results, Path::new("results.csv"));
        assert_eq!(m.artifacts.len(), 1);
        m.validate(out).unwrap();

        std::fs::write(out.join("bad.csv"), "a,b\n1\n").unwrap();
        m.add(out, ArtifactKind::Summary, Path::new("bad.csv"));
        assert!(matches!(m.validate(out), Err(Error::Validation(_))));

        let mut gone = RunManifest::new("h".into(), "s".into(), 0);
        gone.add(out, ArtifactKind::Curve, Path::new("curves/none.json"));
        assert!(matches!(gone.validate(out), Err(Error::MissingArtifact(_))));
    }

    #[test]
    fn reopening_keeps_matching_manifests_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("h".into(), "s".into(), 3);
        m.stage("train-set", 1.5);
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::open(dir.path(), "h", "s", 3).stages.len(), 1);
        assert!(RunManifest::open(dir.path(), "other", "s", 3).stages.is_empty());
    }
}
