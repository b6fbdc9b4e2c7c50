use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("partition is empty")]
    EmptyPartition,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("constant column `{0}` cannot be standardized")]
    ConstantColumn(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("every trained model was filtered out ({trained} trained, mean test accuracy {mean:.4})")]
    DegenerateSet { trained: usize, mean: f64 },

    #[error("invalid perturbation spec: {0}")]
    PerturbSpec(String),

    #[error("curve position t = {0} is outside [0, 1]")]
    Range(f64),

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("ensemble has no constituents")]
    EmptyEnsemble,

    #[error("method `{method}` is not supported for {kind} predictors")]
    UnsupportedMethod {
        method: &'static str,
        kind: &'static str,
    },

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("k must be at least 1")]
    InvalidK,

    #[error("metric error: {0}")]
    Metric(String),

    #[error("angle undefined for a zero attribution vector")]
    UndefinedAngle,

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient set: need {needed} members, have {available}")]
    InsufficientSet { needed: usize, available: usize },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArchitecture(_) => "invalid_architecture",
            Error::Shape { .. } => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::EmptyBatch => "empty_batch",
            Error::EmptyPartition => "empty_partition",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Schema(_) => "schema",
            Error::ConstantColumn(_) => "constant_column",
            Error::InvalidSize(_) => "invalid_size",
            Error::Config(_) => "config",
            Error::DegenerateSet { .. } => "degenerate_set",
            Error::PerturbSpec(_) => "perturb_spec",
            Error::Range(_) => "range",
            Error::InvalidCount(_) => "invalid_count",
            Error::EmptyEnsemble => "empty_ensemble",
            Error::UnsupportedMethod { .. } => "unsupported_method",
            Error::Pairing(_) => "pairing",
            Error::InvalidK => "invalid_k",
            Error::Metric(_) => "metric",
            Error::UndefinedAngle => "undefined_angle",
            Error::Alignment(_) => "alignment",
            Error::InsufficientSet { .. } => "insufficient_set",
            Error::Sampling(_) => "sampling",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
