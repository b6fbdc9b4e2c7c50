use std::fs;
use std::path::Path;

use modeset::explain::Strategy;
use modeset::harness::{ExperimentConfig, Pipeline, RunManifest};

const TINY: &str = r#"
master_seed = 5
set_size = 8
filter_threshold = 1.0
ensemble_sizes = [1, 2]
n_ensemble_sets = 2
eval_input_count = 12

[dataset]
kind = "two-moons"
n = 200
noise = 0.1
seed = 3

[model]
hidden = [8, 4]

[train]
epochs = 4
learning_rate = 0.05
batch_size = 16

[perturb]
count = 3

[curve]
samples = 2
train = { epochs = 2, learning_rate = 0.1, batch_size = 16 }

[ablation]
members = 2
layers = [1, 3]
targets = ["weights"]
sigmas = [0.0, 0.1]
counts = [2]

[toy]
grid = 6
ensemble_size = 2
n_ensembles = 2
strategies = ["vanilla-average", "combine"]
"#;

fn config() -> ExperimentConfig {
    ExperimentConfig::from_toml(TINY).unwrap()
}

#[test]
fn full_run_writes_a_valid_manifest() {
    let out = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(config(), ".", out.path()).unwrap();
    pipeline.all().unwrap();

    let manifest = RunManifest::load(out.path()).unwrap();
    manifest.validate(out.path()).unwrap();
    assert_eq!(manifest.config_hash, config().hash());
    for file in ["results.csv", "summary.csv", "accuracy.csv", "ablation.csv", "toy_single.csv", "toy_combine.csv"] {
        assert!(out.path().join(file).exists(), "{file} missing");
    }
    let ablation = fs::read_to_string(out.path().join("ablation.csv")).unwrap();
    assert_eq!(ablation.lines().count(), 1 + 4);

    // Curve strategies at n=1 are skipped, everything else has rows.
    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    for s in Strategy::ALL {
        assert!(summary.contains(&format!(",{s},2,")), "{s} at n=2");
    }
    assert!(!summary.contains(",connect,1,"));
    let counts: Vec<_> = manifest
        .constituent_counts
        .iter()
        .filter(|c| c.n == 2)
        .map(|c| (c.strategy.as_str(), c.constituents))
        .collect();
    assert!(counts.contains(&("perturb", 6)));
    assert!(counts.contains(&("connect", 2)));
    assert!(counts.contains(&("combine", 6)));
}

fn compare_into(out: &Path) -> String {
    Pipeline::new(config(), ".", out).unwrap().compare().unwrap();
    fs::read_to_string(out.join("results.csv")).unwrap()
}

#[test]
fn compare_is_reproducible_and_seed_sensitive() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = compare_into(a.path());
    assert_eq!(first, compare_into(b.path()));

    let c = tempfile::tempdir().unwrap();
    let reseeded = ExperimentConfig {
        master_seed: 6,
        ..config()
    };
    Pipeline::new(reseeded, ".", c.path()).unwrap().compare().unwrap();
    assert_ne!(first, fs::read_to_string(c.path().join("results.csv")).unwrap());
}

#[test]
fn saved_set_is_reused_through_set_dir() {
    let a = tempfile::tempdir().unwrap();
    let trained = Pipeline::new(config(), ".", a.path()).unwrap().train_set().unwrap();
    let b = tempfile::tempdir().unwrap();
    let reuse = ExperimentConfig {
        set_dir: Some(a.path().join("set")),
        ..config()
    };
    let loaded = Pipeline::new(reuse, ".", b.path()).unwrap().train_set().unwrap();
    assert!(!b.path().join("set").exists());
    assert_eq!(trained.members.len(), loaded.members.len());
    for (x, y) in trained.members.iter().zip(&loaded.members) {
        assert_eq!(x.model, y.model);
    }
    RunManifest::load(b.path()).unwrap().validate(b.path()).unwrap();
}
