//! Manually differentiated MLP stack: model, output heads, loss, and
//! optimizers, plus the versioned checkpoint format.

mod checkpoint;
mod head;
mod loss;
mod model;
mod optim;

pub use checkpoint::{load_model, save_model, ModelCheckpoint, MODEL_FORMAT_VERSION};
pub use head::{
    gumbel_softmax, gumbel_softmax_with_noise, CategoricalBlock, HiddenActivation,
    MixedTabularHead, OutputHead,
};
pub use loss::{bce_loss, PRED_CLAMP};
pub use model::{Forward, Gradients, MlpModel};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
