//! Conditional tabular synthesis: a generator/discriminator pair trained per
//! population group, with a primal-dual density-matching variant of the
//! usual adversarial objective.

mod checkpoint;
mod codec;
mod kernel;
mod train;

pub use checkpoint::{load_gan, save_gan, GanCheckpoint, GAN_FORMAT_VERSION};
pub use codec::{GanCodec, GanHyper};
pub use kernel::{dual_update, estimate_pgen, gaussian_kernel, median_sigma, DIS_CLAMP};
pub use train::{
    dis_objective, dis_objective_grads, gen_composite_grads, gen_composite_loss, DisEval, GanState,
    GenEval, KdePenalty, TraceRow, TrainAlgorithm, TrainingTrace,
};
