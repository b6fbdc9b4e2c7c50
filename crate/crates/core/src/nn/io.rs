//! JSON model files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "layer_dims": [2, 128, 64, 16, 2],
//!   "weights": [[[w00, w01], ...], ...],
//!   "biases": [[b0, ...], ...]
//! }
//! ```
//!
//! `weights[l][i][j]` connects input unit `j` of layer `l` to output unit `i`.
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mlp;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_mlp(mlp: &Mlp) -> Self {
        let weights = mlp
            .layer_dims()
            .windows(2)
            .enumerate()
            .map(|(l, pair)| mlp.weights(l).chunks(pair[0]).map(<[f64]>::to_vec).collect())
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            layer_dims: mlp.layer_dims().to_vec(),
            weights,
            biases: (0..mlp.num_layers()).map(|l| mlp.biases(l).to_vec()).collect(),
        }
    }

    pub fn into_mlp(self) -> Result<Mlp> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let mut flat = Vec::with_capacity(self.weights.len());
        for (l, rows) in self.weights.into_iter().enumerate() {
            let fan_in = self.layer_dims.get(l).copied().unwrap_or(0);
            if let Some(bad) = rows.iter().position(|r| r.len() != fan_in) {
                return Err(Error::Validation(format!(
                    "layer {} row {bad} has {} entries, expected {fan_in}",
                    l + 1,
                    rows[bad].len()
                )));
            }
            flat.push(rows.into_iter().flatten().collect());
        }
        Mlp::from_parts(self.layer_dims, flat, self.biases)
    }
}

pub(crate) fn json_error(err: serde_json::Error, source: &str) -> Error {
    Error::Parse {
        location: format!("{source}:{}:{}", err.line(), err.column()),
        message: err.to_string(),
    }
}

pub fn model_to_json(mlp: &Mlp) -> String {
    serde_json::to_string(&ModelFile::from_mlp(mlp)).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<Mlp> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| json_error(e, "<model>"))?;
    file.into_mlp()
}

pub fn save_model(mlp: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(mlp)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mlp> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| json_error(e, &path.display().to_string()))?;
    file.into_mlp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_mlp;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn truncated_file_is_a_parse_error() {
        let m = init_mlp(&[2, 4, 2], &mut SeededRng::new(1)).unwrap();
        let json = model_to_json(&m);
        let err = model_from_json(&json[..json.len() / 2]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn mismatched_dims_are_a_validation_error() {
        let m = init_mlp(&[2, 4, 2], &mut SeededRng::new(1)).unwrap();
        let mut file = ModelFile::from_mlp(&m);
        file.layer_dims = vec![2, 5, 2];
        let json = serde_json::to_string(&file).unwrap();
        assert!(matches!(model_from_json(&json), Err(Error::Validation(_))));

        let mut file = ModelFile::from_mlp(&m);
        file.biases[1].push(0.0);
        let json = serde_json::to_string(&file).unwrap();
        assert!(matches!(model_from_json(&json), Err(Error::Validation(_))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = init_mlp(&[3, 16, 8, 2], &mut SeededRng::new(99)).unwrap();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert!(m.params().zip(back.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(matches!(load_model(dir.path().join("missing.json")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn json_roundtrip_is_bit_exact(seed in any::<u64>(), scale in -300i32..300) {
            let mut m = init_mlp(&[2, 5, 3, 2], &mut SeededRng::new(seed)).unwrap();
            let factor = 10f64.powi(scale);
            for p in m.params_mut() {
                *p *= factor;
            }
            let back = model_from_json(&model_to_json(&m)).unwrap();
            prop_assert!(m.params().zip(back.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
