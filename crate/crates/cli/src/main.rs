use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modeset::harness::{ExperimentConfig, PairsFile, Pipeline};
use modeset::Error;

#[derive(Parser)]
#[command(name = "modeset", version, about = "Seed-varied model sets, loss-landscape ensembles and explanation agreement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the seed sweep and filter it by test accuracy.
    TrainSet(Common),
    /// Fit mode-connecting curves between member pairs.
    Connect {
        #[command(flatten)]
        common: Common,
        /// JSON file `{"pairs": [[seed_a, seed_b], ...]}`.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Perturbation ablation over layers, targets and noise levels.
    Ablate(Common),
    /// Compare ensemble strategies across ensemble sizes.
    Compare(Common),
    /// Angular disagreement over a 2-D input grid.
    Toy(Common),
    /// Run every stage.
    All(Common),
}

fn pipeline(common: &Common) -> Result<Pipeline, Error> {
    let (mut config, base) = match &common.config {
        Some(path) => (
            ExperimentConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(workers) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {workers} workers: {e}")))?;
    }
    Pipeline::new(config, base, &common.out)
}

fn run(cli: Cli) -> Result<serde_json::Value, Error> {
    Ok(match cli.command {
        Command::TrainSet(c) => {
            let set = pipeline(&c)?.train_set()?;
            serde_json::json!({
                "retained": set.len(),
                "trained": set.report.len(),
                "mean_test_accuracy": set.mean_test_acc,
            })
        }
        Command::Connect { common, pairs } => {
            let pairs = pairs.map(|p| PairsFile::load(&p)).transpose()?.map(|f| f.pairs);
            let written = pipeline(&common)?.connect(pairs)?;
            serde_json::json!({ "curve_files": written.len() })
        }
        Command::Ablate(c) => {
            let rows = pipeline(&c)?.ablate()?;
            serde_json::json!({ "grid_points": rows.len() })
        }
        Command::Compare(c) => {
            let report = pipeline(&c)?.compare()?;
            serde_json::json!({
                "summary_rows": report.summary.len(),
                "single_model_accuracy": report.single_model_accuracy,
            })
        }
        Command::Toy(c) => {
            let report = pipeline(&c)?.toy()?;
            let means: serde_json::Map<String, serde_json::Value> = report
                .series
                .iter()
                .map(|s| (s.label.clone(), s.grid_mean().into()))
                .collect();
            serde_json::json!({ "grid_mean_angle": means })
        }
        Command::All(c) => {
            pipeline(&c)?.all()?;
            serde_json::json!({ "status": "done" })
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = serde_json::json!({ "kind": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
