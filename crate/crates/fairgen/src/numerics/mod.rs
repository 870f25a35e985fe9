//! Plain `f64` building blocks: a row-major dense matrix and a seeded,
//! replayable random source with the samplers the rest of the crate needs.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::{sample_gaussian, sample_gumbel, SeededRng, GUMBEL_UNIT_CLAMP};
