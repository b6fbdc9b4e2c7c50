use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_csv, preprocess, two_moons, Dataset, SchemaConfig};
use crate::error::{Error, Result};
use crate::explain::{ExplainMethod, Strategy};
use crate::landscape::{PerturbSpec, PerturbTarget, SampleMode};
use crate::metrics::{Metric, TopK};
use crate::nn::{DEFAULT_HIDDEN, NUM_CLASSES};
use crate::rng::SeededRng;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    TwoMoons {
        #[serde(default = "default_moons_n")]
        n: usize,
        #[serde(default = "default_moons_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        split_seed: u64,
        schema: SchemaConfig,
    },
}

fn default_moons_n() -> usize {
    1000
}

fn default_moons_noise() -> f64 {
    0.1
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::TwoMoons {
            n: default_moons_n(),
            noise: default_moons_noise(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    /// Relative CSV paths resolve against `base` (the config file's directory).
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DatasetConfig::TwoMoons { n, noise, seed } => two_moons(*n, *noise, &mut SeededRng::new(*seed)),
            DatasetConfig::Csv {
                path,
                split_seed,
                schema,
            } => {
                let path = if path.is_relative() { base.join(path) } else { path.clone() };
                preprocess(&load_csv(&path, schema)?, schema, *split_seed)
            }
        }
    }

    fn default_name(&self) -> String {
        match self {
            DatasetConfig::TwoMoons { .. } => "two_moons".into(),
            DatasetConfig::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    pub layer: usize,
    pub target: PerturbTarget,
    pub sigma: f64,
    pub count: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            layer: 1,
            target: PerturbTarget::Weights,
            sigma: 0.1,
            count: 20,
        }
    }
}

impl PerturbConfig {
    pub fn spec(&self, seed: u64) -> PerturbSpec {
        PerturbSpec {
            layer: self.layer,
            target: self.target,
            sigma: self.sigma,
            count: self.count,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub samples: usize,
    pub mode: SampleMode,
    pub train: TrainConfig,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            samples: 10,
            mode: SampleMode::Grid,
            train: TrainConfig {
                epochs: 200,
                learning_rate: 0.2,
                batch_size: 32,
                shuffle_each_epoch: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub names: Vec<Metric>,
    pub k: Vec<TopK>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            names: Metric::ALL.to_vec(),
            k: vec![TopK::Count(5), TopK::All],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub members: usize,
    pub layers: Vec<usize>,
    pub targets: Vec<PerturbTarget>,
    pub sigmas: Vec<f64>,
    pub counts: Vec<usize>,
    pub k: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            members: 24,
            layers: vec![1, 2, 3, 4],
            targets: vec![PerturbTarget::Weights, PerturbTarget::Biases],
            sigmas: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            counts: vec![20],
            k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    /// Points per axis.
    pub grid: usize,
    pub ensemble_size: usize,
    /// Number of ensembles; by default as many disjoint ones as the set allows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ensembles: Option<usize>,
    pub strategies: Vec<Strategy>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            grid: 100,
            ensemble_size: 10,
            n_ensembles: None,
            strategies: vec![Strategy::VanillaAverage],
        }
    }
}

/// Everything an experiment run needs. Parsed from TOML; every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub master_seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Seeds `first_seed .. first_seed + set_size` are trained.
    pub set_size: usize,
    pub first_seed: u64,
    pub filter_threshold: f64,
    /// Load a previously trained set from here instead of training.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set_dir: Option<PathBuf>,
    pub ensemble_sizes: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub n_ensemble_sets: usize,
    pub eval_input_count: usize,
    pub perturb: PerturbConfig,
    pub curve: CurveConfig,
    pub explain: ExplainMethod,
    pub metrics: MetricsConfig,
    pub ablation: AblationConfig,
    pub toy: ToyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: None,
            master_seed: 0,
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            set_size: 32,
            first_seed: 0,
            filter_threshold: 0.01,
            set_dir: None,
            ensemble_sizes: vec![1, 2, 4, 8, 16],
            strategies: Strategy::ALL.to_vec(),
            n_ensemble_sets: 10,
            eval_input_count: 200,
            perturb: PerturbConfig::default(),
            curve: CurveConfig::default(),
            explain: ExplainMethod::Saliency,
            metrics: MetricsConfig::default(),
            ablation: AblationConfig::default(),
            toy: ToyConfig::default(),
        }
    }
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Serialize)]
struct SetKey<'a> {
    dataset: &'a DatasetConfig,
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    set_size: usize,
    first_seed: u64,
    filter_threshold: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.dataset.default_name())
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.model.hidden.len() + 2);
        dims.push(input_dim);
        dims.extend(&self.model.hidden);
        dims.push(NUM_CLASSES);
        dims
    }

    /// Hash of the whole config.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_string(self).expect("config serializes to JSON"))
    }

    /// Hash of the settings that determine the trained set.
    pub fn set_hash(&self) -> String {
        let key = SetKey {
            dataset: &self.dataset,
            model: &self.model,
            train: &self.train,
            set_size: self.set_size,
            first_seed: self.first_seed,
            filter_threshold: self.filter_threshold,
        };
        sha256_hex(&serde_json::to_string(&key).expect("set key serializes"))
    }

    /// Hash keying cached curves: the trained set plus curve training settings.
    pub fn curve_hash(&self) -> String {
        sha256_hex(&format!(
            "{}:{}",
            self.set_hash(),
            serde_json::to_string(&self.curve.train).expect("train config serializes")
        ))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.set_size as u64).map(|i| self.first_seed + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.curve.train.validate()?;
        if self.set_size == 0 {
            return Err(Error::Config("set_size must be at least 1".into()));
        }
        if self.filter_threshold.is_nan() || self.filter_threshold < 0.0 {
            return Err(Error::Config("filter_threshold must be >= 0".into()));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.ensemble_sizes.contains(&0) {
            return Err(Error::Config("ensemble sizes must be positive".into()));
        }
        if self.n_ensemble_sets < 2 {
            return Err(Error::Config("n_ensemble_sets must be at least 2 to form pairs".into()));
        }
        if self.eval_input_count == 0 {
            return Err(Error::Config("eval_input_count must be at least 1".into()));
        }
        if self.curve.samples == 0 {
            return Err(Error::Config("curve.samples must be at least 1".into()));
        }
        if !(self.perturb.sigma >= 0.0 && self.perturb.sigma.is_finite()) || self.perturb.count == 0 {
            return Err(Error::Config("perturb needs sigma >= 0 and count >= 1".into()));
        }
        let num_layers = self.model.hidden.len() + 1;
        if self.perturb.layer == 0 || self.perturb.layer > num_layers {
            return Err(Error::Config(format!("perturb.layer must lie in 1..={num_layers}")));
        }
        if self.ablation.layers.iter().any(|&l| l == 0 || l > num_layers) {
            return Err(Error::Config(format!("ablation layers must lie in 1..={num_layers}")));
        }
        if self.ablation.members < 2 || self.ablation.k == 0 {
            return Err(Error::Config("ablation needs at least 2 members and k >= 1".into()));
        }
        if self.ablation.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || self.ablation.counts.contains(&0) {
            return Err(Error::Config("ablation sigmas must be >= 0 and counts >= 1".into()));
        }
        if self.toy.grid < 2 || self.toy.ensemble_size == 0 {
            return Err(Error::Config("toy grid needs >= 2 points per axis and a positive ensemble size".into()));
        }
        if let ExplainMethod::Smoothgrad { sigma, samples } = self.explain {
            if !(sigma >= 0.0 && sigma.is_finite()) || samples == 0 {
                return Err(Error::Config("smoothgrad needs sigma >= 0 and samples >= 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.set_size, 32);
        assert_eq!(c.n_ensemble_sets, 10);
        assert_eq!(c.eval_input_count, 200);
        assert_eq!(c.dataset_name(), "two_moons");
        assert_eq!(c.layer_dims(2), vec![2, 128, 64, 16, 2]);
    }

    #[test]
    fn toml_roundtrip_and_hash_stability() {
        let text = r#"
            master_seed = 7
            ensemble_sizes = [2, 4]
            strategies = ["vanilla-average", "combine"]

            [dataset]
            kind = "two-moons"
            n = 400

            [explain]
            method = "smoothgrad"
            sigma = 0.1
            samples = 50

            [metrics]
            names = ["sa"]
            k = [5, "d"]

            [curve]
            samples = 4
            mode = "uniform"
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.strategies, vec![Strategy::VanillaAverage, Strategy::Combine]);
        assert_eq!(c.curve.samples, 4);
        assert_eq!(c.curve.train, CurveConfig::default().train);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let other = ExperimentConfig { master_seed: 8, ..c.clone() };
        assert_ne!(other.hash(), c.hash());
        assert_eq!(other.set_hash(), c.set_hash());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "set_size = 0",
            "n_ensemble_sets = 1",
            "unknown_key = 3",
            "[train]\nepochs = 0\nlearning_rate = 0.1\nbatch_size = 4",
            "[perturb]\nlayer = 9",
            "[explain]\nmethod = \"deepshap\"",
            "[metrics]\nk = [0]",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn csv_paths_resolve_against_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "a,y\n1,0\n2,1\n3,0\n4,1\n5,1\n").unwrap();
        let text = r#"
            [dataset]
            kind = "csv"
            path = "d.csv"
            [dataset.schema]
            label_column = "y"
            positive_values = ["1"]
            features = [{ name = "a", kind = "continuous" }]
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        let data = c.dataset.load(dir.path()).unwrap();
        assert_eq!(data.len(), 5);
        assert_eq!(c.dataset_name(), "d");
    }
}
