//! On-disk layout of trained sets and curves.
//!
//! ```text
//! <dir>/set_manifest.json
//! <dir>/models/seed_<seed>.json
//! <dir>/curves/curve_<a>_<b>.json
//! <dir>/curves/curve_<a>_<b>.profile.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::landscape::{load_curve, loss_profile, save_curve, train_curve_fixed, CurveMetadata, CurveParams};
use crate::nn::{load_model, model_from_json, save_model};
use crate::rng::{derive_seed, SeededRng};
use crate::training::{build_underspec_set, Member, MemberSummary, TrainConfig, UnderspecSet};

pub const SET_MANIFEST: &str = "set_manifest.json";
const CURVE_STREAM_TAG: u64 = 0x0c0e_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetManifest {
    pub set_hash: String,
    pub layer_dims: Vec<usize>,
    pub train: TrainConfig,
    pub filter_threshold: f64,
    pub mean_test_acc: f64,
    pub report: Vec<MemberSummary>,
    /// Retained members, relative to the set directory.
    pub models: Vec<ModelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub seed: u64,
    pub path: PathBuf,
}

fn model_path(seed: u64) -> PathBuf {
    Path::new("models").join(format!("seed_{seed}.json"))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| crate::nn::io::json_error(e, &path.display().to_string()))
}

/// Write every retained member plus the retention report.
pub fn save_set(set: &UnderspecSet, set_hash: &str, dir: &Path) -> Result<PathBuf> {
    create_dir(&dir.join("models"))?;
    let mut models = Vec::with_capacity(set.len());
    for m in &set.members {
        let rel = model_path(m.seed);
        save_model(&m.model, dir.join(&rel))?;
        models.push(ModelEntry { seed: m.seed, path: rel });
    }
    let manifest = SetManifest {
        set_hash: set_hash.to_string(),
        layer_dims: set.layer_dims.clone(),
        train: set.config,
        filter_threshold: set.filter_threshold,
        mean_test_acc: set.mean_test_acc,
        report: set.report.clone(),
        models,
    };
    let path = dir.join(SET_MANIFEST);
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn load_set(dir: &Path) -> Result<(UnderspecSet, String)> {
    let path = dir.join(SET_MANIFEST);
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("no trained set at {}", path.display())));
    }
    let manifest: SetManifest = read_json(&path)?;
    let mut members = Vec::with_capacity(manifest.models.len());
    for entry in &manifest.models {
        let model = load_model(dir.join(&entry.path))?;
        if model.layer_dims() != manifest.layer_dims.as_slice() {
            return Err(Error::Validation(format!(
                "model for seed {} does not match the set architecture",
                entry.seed
            )));
        }
        let summary = manifest
            .report
            .iter()
            .find(|r| r.seed == entry.seed && r.retained)
            .ok_or_else(|| Error::Validation(format!("seed {} is not a retained member", entry.seed)))?;
        members.push(Member {
            seed: entry.seed,
            model,
            train_acc: summary.train_acc,
            test_acc: summary.test_acc,
        });
    }
    if members.is_empty() {
        return Err(Error::Validation("trained set has no members".into()));
    }
    let set = UnderspecSet {
        members,
        report: manifest.report,
        filter_threshold: manifest.filter_threshold,
        mean_test_acc: manifest.mean_test_acc,
        config: manifest.train,
        layer_dims: manifest.layer_dims,
    };
    Ok((set, manifest.set_hash))
}

/// Check a saved set manifest and every model it lists.
pub fn validate_set_dir(dir: &Path) -> Result<()> {
    let manifest: SetManifest = read_json(&dir.join(SET_MANIFEST))?;
    for entry in &manifest.models {
        let path = dir.join(&entry.path);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        model_from_json(&text)?;
    }
    Ok(())
}

/// The set described by `config`: loaded from `config.set_dir` or from
/// `out/set` when a matching one exists there, trained (and saved) otherwise.
pub fn obtain_set(config: &ExperimentConfig, data: &Dataset, out: &Path) -> Result<UnderspecSet> {
    let expected = config.set_hash();
    if let Some(dir) = &config.set_dir {
        let (set, hash) = load_set(dir)?;
        if hash != expected {
            return Err(Error::Config(format!(
                "set at {} was trained with different settings",
                dir.display()
            )));
        }
        return Ok(set);
    }
    let dir = out.join("set");
    if dir.join(SET_MANIFEST).exists() {
        let (set, hash) = load_set(&dir)?;
        if hash == expected {
            log::info!("reusing trained set in {}", dir.display());
            return Ok(set);
        }
        log::info!("settings changed; retraining the set in {}", dir.display());
    }
    let dims = config.layer_dims(data.dim());
    let set = build_underspec_set(data, &dims, &config.train, &config.seeds(), config.filter_threshold)?;
    save_set(&set, &expected, &dir)?;
    Ok(set)
}

/// Fixed-endpoint curves keyed by their endpoint seeds, trained on demand
/// and optionally mirrored to disk.
pub struct CurveStore {
    dir: Option<PathBuf>,
    hash: String,
    config: TrainConfig,
    curves: BTreeMap<(u64, u64), CurveParams>,
    trained: usize,
}

impl CurveStore {
    pub fn new(config: &ExperimentConfig, dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            hash: config.curve_hash(),
            config: config.curve.train,
            curves: BTreeMap::new(),
            trained: 0,
        }
    }

    pub fn file_name(a: u64, b: u64) -> String {
        format!("curve_{a}_{b}.json")
    }

    pub fn profile_name(a: u64, b: u64) -> String {
        format!("curve_{a}_{b}.profile.csv")
    }

    /// Number of curves trained (rather than loaded) by this store.
    pub fn trained_count(&self) -> usize {
        self.trained
    }

    pub fn get(&self, a: u64, b: u64) -> Option<&CurveParams> {
        self.curves.get(&(a, b))
    }

    fn load_cached(&self, a: u64, b: u64) -> Option<CurveParams> {
        let path = self.dir.as_ref()?.join(Self::file_name(a, b));
        if !path.exists() {
            return None;
        }
        match load_curve(&path) {
            Ok((curve, meta)) if meta.config_hash == self.hash => Some(curve),
            Ok(_) => None,
            Err(e) => {
                log::warn!("ignoring unreadable cached curve {}: {e}", path.display());
                None
            }
        }
    }

    /// Make sure a curve exists for every `(a, b)` pair of member seeds.
    pub fn ensure(&mut self, pairs: &[(u64, u64)], set: &UnderspecSet, data: &Dataset) -> Result<Vec<PathBuf>> {
        let mut missing = Vec::new();
        for &(a, b) in pairs {
            if self.curves.contains_key(&(a, b)) || missing.contains(&(a, b)) {
                continue;
            }
            match self.load_cached(a, b) {
                Some(c) => {
                    self.curves.insert((a, b), c);
                }
                None => missing.push((a, b)),
            }
        }
        let config = self.config;
        let trained: Vec<((u64, u64), CurveParams)> = missing
            .par_iter()
            .map(|&(a, b)| {
                let member = |s: u64| {
                    set.member_by_seed(s)
                        .ok_or_else(|| Error::MissingArtifact(format!("seed {s} is not in the trained set")))
                };
                let mut rng = SeededRng::new(derive_seed(a, &[b, CURVE_STREAM_TAG]));
                let curve = train_curve_fixed(&member(a)?.model, &member(b)?.model, data, &config, &mut rng)?;
                Ok(((a, b), curve))
            })
            .collect::<Result<_>>()?;
        let mut written = Vec::new();
        for (key, curve) in trained {
            self.trained += 1;
            if let Some(dir) = &self.dir {
                create_dir(dir)?;
                let meta = CurveMetadata {
                    method: "fixed".into(),
                    start_seed: key.0,
                    end_seed: key.1,
                    train: config,
                    config_hash: self.hash.clone(),
                };
                let path = dir.join(Self::file_name(key.0, key.1));
                save_curve(&curve, meta, &path)?;
                let profile = dir.join(Self::profile_name(key.0, key.1));
                write_profile(&curve, data, &profile)?;
                written.push(path);
                written.push(profile);
            }
            self.curves.insert(key, curve);
        }
        Ok(written)
    }
}

/// `t,loss,accuracy` over 21 evenly spaced positions.
pub fn write_profile(curve: &CurveParams, data: &Dataset, path: &Path) -> Result<()> {
    let mut text = String::from("t,loss,accuracy\n");
    for p in loss_profile(curve, data, 21)? {
        writeln!(text, "{},{},{}", p.t, p.loss, p.accuracy).expect("write to string");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
