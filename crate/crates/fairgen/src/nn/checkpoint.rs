//! Versioned JSON checkpoint for a single network.
//!
//! Weights and biases are stored as row-major arrays of full-precision
//! reals (serde_json emits shortest round-trip decimal), so a load
//! reproduces the saved parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::head::{HiddenActivation, OutputHead};
use crate::nn::model::MlpModel;
use crate::numerics::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_head: OutputHead,
    /// Row-major weight buffer per layer, `dims[l] x dims[l+1]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Seed of the run that produced these parameters.
    pub seed: u64,
}

impl ModelCheckpoint {
    pub fn from_model(model: &MlpModel, seed: u64) -> ModelCheckpoint {
        ModelCheckpoint {
            format_version: MODEL_FORMAT_VERSION,
            layer_dims: model.layer_dims().to_vec(),
            hidden_activation: model.hidden_activation(),
            output_head: model.output_head().clone(),
            weights: model.weights().iter().map(|w| w.data().to_vec()).collect(),
            biases: model.biases().to_vec(),
            seed,
        }
    }

    pub fn into_model(self) -> Result<MlpModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if self.weights.len() + 1 != self.layer_dims.len() {
            return Err(Error::param(
                "checkpoint",
                format!(
                    "{} weight layers for {} dims",
                    self.weights.len(),
                    self.layer_dims.len()
                ),
            ));
        }
        let mut weights = Vec::with_capacity(self.weights.len());
        for (l, buf) in self.weights.into_iter().enumerate() {
            weights.push(Matrix::from_vec(
                self.layer_dims[l],
                self.layer_dims[l + 1],
                buf,
            )?);
        }
        MlpModel::from_params(self.layer_dims, weights, self.biases, self.output_head)
    }
}

pub fn save_model(path: &Path, model: &MlpModel, seed: u64) -> Result<()> {
    let ckpt = ModelCheckpoint::from_model(model, seed);
    crate::artifact::atomic_write(path, serde_json::to_vec_pretty(&ckpt)?.as_slice())
}

pub fn load_model(path: &Path) -> Result<(MlpModel, u64)> {
    let bytes = std::fs::read(path)?;
    let ckpt: ModelCheckpoint = serde_json::from_slice(&bytes)?;
    let seed = ckpt.seed;
    Ok((ckpt.into_model()?, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::head::{CategoricalBlock, MixedTabularHead};
    use crate::numerics::SeededRng;

    fn mixed_model(seed: u64) -> MlpModel {
        let head = MixedTabularHead {
            numeric_width: 2,
            categorical_blocks: vec![CategoricalBlock { name: "label".into(), cardinality: 2 }],
            temperature: 0.5,
        };
        let mut rng = SeededRng::new(seed);
        MlpModel::three_hidden(5, 6, head.width(), OutputHead::MixedTabular(head), &mut rng)
            .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = mixed_model(77);
        save_model(&path, &model, 77).unwrap();
        let (loaded, seed) = load_model(&path).unwrap();
        assert_eq!(seed, 77);
        assert_eq!(loaded, model);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let mut ckpt = ModelCheckpoint::from_model(&mixed_model(1), 1);
        ckpt.format_version = 99;
        let err = ckpt.into_model().unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion { found: 99, .. }));
    }

    #[test]
    fn corrupt_json_is_an_error_not_a_panic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, b"{\"format_version\": 1,").unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn inconsistent_dims_are_rejected() {
        let mut ckpt = ModelCheckpoint::from_model(&mixed_model(2), 2);
        ckpt.weights.pop();
        assert!(ckpt.into_model().is_err());
    }
}
