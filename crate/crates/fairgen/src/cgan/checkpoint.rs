//! On-disk format for a trained generator/discriminator pair.
//!
//! The checkpoint is self-contained: it embeds the schema, the group the
//! networks were trained for, the fitted numeric bounds, and both models, so
//! generation needs nothing beyond this one file. Loaded states can generate
//! but not resume training, because the checkpoint stores no training rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Encoder, GroupPredicate, NumericBounds, Schema};
use crate::error::{Error, Result};
use crate::nn::ModelCheckpoint;

use super::codec::{GanCodec, GanHyper};
use super::train::{GanState, TrainAlgorithm};

pub const GAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GanCheckpoint {
    pub format_version: u32,
    pub schema: Schema,
    /// Digest of `schema`, for quick compatibility checks across artifacts.
    pub schema_digest: String,
    pub group: GroupPredicate,
    pub hyper: GanHyper,
    pub algorithm: TrainAlgorithm,
    /// Resolved kernel bandwidth, if training ever ran.
    pub sigma: Option<f64>,
    pub rounds_trained: usize,
    pub seed: u64,
    /// Per-column numeric ranges the encoder was fitted with.
    pub numeric_bounds: Vec<Option<NumericBounds>>,
    pub generator: ModelCheckpoint,
    pub discriminator: ModelCheckpoint,
}

impl GanCheckpoint {
    pub fn from_state(state: &GanState) -> GanCheckpoint {
        let encoder = state.codec().encoder();
        GanCheckpoint {
            format_version: GAN_FORMAT_VERSION,
            schema: encoder.schema().clone(),
            schema_digest: encoder.schema().digest(),
            group: state.codec().predicate().clone(),
            hyper: state.hyper().clone(),
            algorithm: state.algorithm(),
            sigma: state.sigma(),
            rounds_trained: state.rounds_trained(),
            seed: state.seed(),
            numeric_bounds: encoder.bounds().to_vec(),
            generator: ModelCheckpoint::from_model(state.generator(), state.seed()),
            discriminator: ModelCheckpoint::from_model(state.discriminator(), state.seed()),
        }
    }

    pub fn into_state(self) -> Result<GanState> {
        if self.format_version != GAN_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                expected: GAN_FORMAT_VERSION,
            });
        }
        self.hyper.validate()?;
        let encoder = Encoder::from_parts(self.schema, self.numeric_bounds)?;
        let codec = GanCodec::new(encoder, self.group)?;
        let gen = self.generator.into_model()?;
        let dis = self.discriminator.into_model()?;
        if gen.output_width() != codec.gen_output_width() {
            return Err(Error::param("generator", "output width does not match the schema and group"));
        }
        if dis.input_width() != codec.dis_input_width() {
            return Err(Error::param("discriminator", "input width does not match the schema and group"));
        }
        GanState::from_parts(
            codec,
            self.hyper,
            self.algorithm,
            gen,
            dis,
            self.sigma,
            self.rounds_trained,
            self.seed,
        )
    }
}

pub fn save_gan(path: &Path, state: &GanState) -> Result<()> {
    crate::artifact::write_json(path, &GanCheckpoint::from_state(state))
}

pub fn load_gan(path: &Path) -> Result<GanState> {
    let bytes = std::fs::read(path)?;
    let ckpt: GanCheckpoint = serde_json::from_slice(&bytes)?;
    ckpt.into_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Cell, DatasetTable, Provenance, Row};
    use crate::numerics::SeededRng;

    fn trained_state() -> GanState {
        let schema = Schema::new(vec![
            crate::dataset::ColumnSpec::numeric("x"),
            crate::dataset::ColumnSpec::categorical("group", &["a", "b"]).sensitive(),
            crate::dataset::ColumnSpec::categorical("outcome", &["no", "yes"]).label(),
        ])
        .unwrap();
        let mut t = DatasetTable::new(schema);
        let mut rng = SeededRng::new(50);
        for i in 0..30 {
            t.push_row(Row {
                cells: vec![
                    Cell::numeric(rng.next_f64()),
                    Cell::categorical(i % 2),
                    Cell::categorical(i % 2),
                ],
                provenance: Provenance::Original,
            })
            .unwrap();
        }
        let hyper = GanHyper {
            n1: 6,
            n2: 6,
            noise_dim: 3,
            hidden_units: 6,
            epsilon_rounds: 2,
            ..GanHyper::default()
        };
        let mut state =
            GanState::new(&t, "group=a".parse().unwrap(), hyper, TrainAlgorithm::PrimalDual, 8).unwrap();
        state.train().unwrap();
        state
    }

    #[test]
    fn round_trip_preserves_weights_and_generation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gan.json");
        let state = trained_state();
        save_gan(&path, &state).unwrap();
        let loaded = load_gan(&path).unwrap();

        assert_eq!(loaded.rounds_trained(), state.rounds_trained());
        assert_eq!(loaded.sigma(), state.sigma());
        assert_eq!(loaded.algorithm(), state.algorithm());
        for (a, b) in state.generator().weights().iter().zip(loaded.generator().weights()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let from_orig = state.generate(8, &mut SeededRng::new(3)).unwrap();
        let from_load = loaded.generate(8, &mut SeededRng::new(3)).unwrap();
        assert_eq!(from_orig, from_load);
    }

    #[test]
    fn loaded_states_cannot_train() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gan.json");
        save_gan(&path, &trained_state()).unwrap();
        let mut loaded = load_gan(&path).unwrap();
        assert_eq!(loaded.n_real(), 0);
        assert!(matches!(loaded.round_step(), Err(Error::Usage(_))));
    }

    #[test]
    fn future_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gan.json");
        save_gan(&path, &trained_state()).unwrap();
        let mut ckpt: GanCheckpoint =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        ckpt.format_version = 9;
        match ckpt.into_state() {
            Err(Error::UnsupportedVersion { found, expected }) => {
                assert_eq!((found, expected), (9, GAN_FORMAT_VERSION));
            }
            other => panic!("unexpected: {:?}", other.map(|_| ())),
        }
    }
}
