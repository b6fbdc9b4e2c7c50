//! Config-driven experiment stages: set training, curve fitting, perturbation
//! ablation, strategy comparison and the 2-D angle grid.
//!
//! Every stage writes under one output directory and records what it wrote in
//! `<out>/manifest.json`.

pub mod ablation;
pub mod compare;
pub mod config;
pub mod manifest;
pub mod store;
pub mod toy;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use ablation::{run_ablation, write_ablation, AblationRow};
pub use compare::{member_sets, run_comparison, AccuracyRow, AttributionTable, ComparisonReport, ScoreRow, SummaryRow};
pub use config::{
    AblationConfig, CurveConfig, DatasetConfig, ExperimentConfig, MetricsConfig, ModelConfig, PerturbConfig,
    ToyConfig,
};
pub use manifest::{Artifact, ArtifactKind, ConstituentCount, RunManifest, MANIFEST, TOOL_VERSION};
pub use store::{load_set, obtain_set, save_set, CurveStore, SetManifest};
pub use toy::{grid_points, run_toy, ToyReport, ToySeries};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::training::UnderspecSet;

/// Stream tags for seeds derived from the master seed.
pub mod tags {
    pub const ORDER: u64 = 0x6f72_6465_7200_0001;
    pub const PERTURB: u64 = 0x7065_7274_7500_0002;
    pub const SAMPLE: u64 = 0x7361_6d70_6c00_0003;
    pub const EXPLAIN: u64 = 0x6578_706c_6100_0004;
    pub const ABLATION: u64 = 0x6162_6c61_7400_0005;
    pub const TOY: u64 = 0x746f_7900_0000_0006;
}

/// The first `count` rows of the test partition as `(row index, features)`.
pub fn eval_inputs(data: &Dataset, count: usize) -> Vec<(usize, &[f64])> {
    data.test().iter().take(count).map(|(i, x, _)| (i, x)).collect()
}

/// Retained-member indices in the order fixed by `master_seed`.
pub fn member_order(set: &UnderspecSet, master_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    SeededRng::derive(master_seed, &[tags::ORDER]).shuffle(&mut order);
    order
}

/// Explicit endpoint pairs for curve fitting, as `{"pairs": [[a, b], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsFile {
    pub pairs: Vec<(u64, u64)>,
}

impl PairsFile {
    pub fn load(path: &Path) -> Result<Self> {
        store::read_json(path)
    }
}

/// Runs stages for one config into one output directory.
pub struct Pipeline {
    config: ExperimentConfig,
    /// Directory relative dataset paths resolve against.
    base: PathBuf,
    out: PathBuf,
}

impl Pipeline {
    /// `set_dir` is resolved against `base` like dataset paths.
    pub fn new(mut config: ExperimentConfig, base: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let base = base.into();
        if let Some(dir) = &config.set_dir {
            let joined = base.join(dir);
            config.set_dir = Some(std::path::absolute(&joined).map_err(|e| Error::io(&joined, e))?);
        }
        let out = out.into();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self { config, base, out })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    fn manifest(&self) -> Result<RunManifest> {
        let c = &self.config;
        let mut m = RunManifest::open(&self.out, &c.hash(), &c.set_hash(), c.master_seed);
        let path = self.out.join("config.toml");
        std::fs::write(&path, c.to_toml()).map_err(|e| Error::io(&path, e))?;
        m.add(&self.out, ArtifactKind::Config, &path);
        Ok(m)
    }

    fn set_manifest_path(&self) -> PathBuf {
        match &self.config.set_dir {
            Some(dir) => dir.join(store::SET_MANIFEST),
            None => self.out.join("set").join(store::SET_MANIFEST),
        }
    }

    fn prepare(&self, m: &mut RunManifest) -> Result<(Dataset, UnderspecSet)> {
        let start = Instant::now();
        let data = self.config.dataset.load(&self.base)?;
        let set = obtain_set(&self.config, &data, &self.out)?;
        m.add(&self.out, ArtifactKind::SetManifest, &self.set_manifest_path());
        m.stage("train-set", start.elapsed().as_secs_f64());
        Ok((data, set))
    }

    fn curve_store(&self) -> CurveStore {
        CurveStore::new(&self.config, Some(self.out.join("curves")))
    }

    fn record_curves(&self, m: &mut RunManifest, written: &[PathBuf]) {
        for p in written {
            let kind = if p.extension().is_some_and(|e| e == "csv") {
                ArtifactKind::CurveProfile
            } else {
                ArtifactKind::Curve
            };
            m.add(&self.out, kind, p);
        }
    }

    pub fn train_set(&self) -> Result<UnderspecSet> {
        let mut m = self.manifest()?;
        let (_, set) = self.prepare(&mut m)?;
        m.save(&self.out)?;
        Ok(set)
    }

    /// Fit curves for `pairs` of member seeds; by default consecutive pairs in
    /// the master-seed member order, which are the pairs the comparison uses.
    pub fn connect(&self, pairs: Option<Vec<(u64, u64)>>) -> Result<Vec<PathBuf>> {
        let mut m = self.manifest()?;
        let (data, set) = self.prepare(&mut m)?;
        let start = Instant::now();
        let pairs = pairs.unwrap_or_else(|| {
            member_order(&set, self.config.master_seed)
                .chunks_exact(2)
                .map(|p| (set.members[p[0]].seed, set.members[p[1]].seed))
                .collect()
        });
        let mut curves = self.curve_store();
        curves.ensure(&pairs, &set, &data)?;
        // Cached curves are listed too.
        let dir = self.out.join("curves");
        let mut listed = Vec::new();
        for &(a, b) in &pairs {
            listed.push(dir.join(CurveStore::file_name(a, b)));
            let profile = dir.join(CurveStore::profile_name(a, b));
            if profile.exists() {
                listed.push(profile);
            }
        }
        self.record_curves(&mut m, &listed);
        m.stage("connect", start.elapsed().as_secs_f64());
        m.save(&self.out)?;
        log::info!("{} curves ready, {} trained now", pairs.len(), curves.trained_count());
        Ok(listed)
    }

    pub fn ablate(&self) -> Result<Vec<AblationRow>> {
        let mut m = self.manifest()?;
        let (data, set) = self.prepare(&mut m)?;
        let start = Instant::now();
        let rows = run_ablation(&self.config, &data, &set)?;
        let path = self.out.join("ablation.csv");
        write_ablation(&rows, &path)?;
        m.add(&self.out, ArtifactKind::Ablation, &path);
        m.stage("ablate", start.elapsed().as_secs_f64());
        m.save(&self.out)?;
        Ok(rows)
    }

    pub fn compare(&self) -> Result<ComparisonReport> {
        let mut m = self.manifest()?;
        let (data, set) = self.prepare(&mut m)?;
        let start = Instant::now();
        let mut curves = self.curve_store();
        let report = run_comparison(&self.config, &data, &set, &mut curves)?;
        let written = report.write(&self.out)?;
        let kinds = [ArtifactKind::Results, ArtifactKind::Summary, ArtifactKind::Accuracy];
        for (kind, path) in kinds.into_iter().zip(&written) {
            m.add(&self.out, kind, path);
        }
        let attributions = report.write_attributions(&self.out.join("attributions"))?;
        m.add_all(&self.out, ArtifactKind::Attributions, &attributions);
        self.record_curve_dir(&mut m)?;
        m.constituent_counts = report
            .constituent_counts()
            .into_iter()
            .map(|(strategy, n, constituents)| ConstituentCount {
                strategy: strategy.to_string(),
                n,
                constituents,
            })
            .collect();
        m.stage("compare", start.elapsed().as_secs_f64());
        m.save(&self.out)?;
        Ok(report)
    }

    pub fn toy(&self) -> Result<ToyReport> {
        let mut m = self.manifest()?;
        let (data, set) = self.prepare(&mut m)?;
        let start = Instant::now();
        let mut curves = self.curve_store();
        let report = run_toy(&self.config, &data, &set, &mut curves)?;
        let written = report.write(&self.out)?;
        m.add_all(&self.out, ArtifactKind::Toy, &written);
        self.record_curve_dir(&mut m)?;
        m.stage("toy", start.elapsed().as_secs_f64());
        m.save(&self.out)?;
        Ok(report)
    }

    /// Every stage in order.
    pub fn all(&self) -> Result<()> {
        self.train_set()?;
        self.connect(None)?;
        self.ablate()?;
        self.compare()?;
        if self.config.dataset_dim_hint() == Some(2) {
            self.toy()?;
        }
        Ok(())
    }

    fn record_curve_dir(&self, m: &mut RunManifest) -> Result<()> {
        let dir = self.out.join("curves");
        if !dir.exists() {
            return Ok(());
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        paths.sort();
        self.record_curves(m, &paths);
        Ok(())
    }
}

impl ExperimentConfig {
    /// Input width when it is known without loading data.
    pub fn dataset_dim_hint(&self) -> Option<usize> {
        match self.dataset {
            DatasetConfig::TwoMoons { .. } => Some(2),
            DatasetConfig::Csv { .. } => None,
        }
    }
}
