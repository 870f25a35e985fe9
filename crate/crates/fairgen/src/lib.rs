//! Bias auditing and targeted data augmentation for tabular classifiers.
//!
//! The crate answers three questions about a tabular classification dataset:
//!
//! 1. **Where is the bias?** Train a classifier, then compare per-group
//!    prediction histograms and accuracies across the values of every
//!    sensitive column ([`bias`]).
//! 2. **How do we get more data for the groups that lose out?** Train a
//!    conditional GAN on the rows of a targeted population group with a
//!    primal-dual subgradient algorithm that keeps the generator close to
//!    the group's real distribution ([`cgan`]).
//! 3. **Did augmentation help?** Append synthetic rows by designer-chosen
//!    fractions, retrain, and re-audit with confidence intervals
//!    ([`dataset`], [`classifier`]).
//!
//! Everything is driven by a seeded, replayable random source and plain
//! `f64` math ([`numerics`]), with a small manually differentiated MLP
//! stack ([`nn`]) underneath both the GAN and the classifier. Artifacts
//! (checkpoints, reports, traces) serialize to JSON/CSV with stable byte
//! layout so identical runs produce identical files ([`artifact`]).

pub mod artifact;
pub mod bias;
pub mod cgan;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod nn;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{Matrix, SeededRng};
