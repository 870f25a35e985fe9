//! Multi-layer perceptron with manually derived backpropagation.
//!
//! Layer `l` computes `z_l = a_{l-1} W_l + b_l` with `W_l` stored
//! `dims[l] x dims[l+1]` row-major; hidden layers apply ReLU and the
//! final pre-activation goes through the configured [`OutputHead`].
//! `forward` returns the output together with the cached intermediates
//! that `backward` needs; `backward` checks the cache actually belongs
//! to this model and this batch before trusting it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::head::{HiddenActivation, OutputHead};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    hidden_activation: HiddenActivation,
    output_head: OutputHead,
}

/// Output of a forward pass plus everything backward needs.
#[derive(Debug, Clone)]
pub struct Forward {
    output: Matrix,
    /// Pre-activations per layer.
    pre: Vec<Matrix>,
    /// Post-activation outputs of hidden layers (inputs to layers 1..).
    hidden_post: Vec<Matrix>,
    input: Matrix,
    /// Snapshot of the producing model's dims, for staleness detection.
    dims: Vec<usize>,
}

impl Forward {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Smallest |pre-activation| across the hidden layers of this pass.
    ///
    /// A value near zero means some unit sits on the ReLU corner, where the
    /// loss surface has a crease and one-sided slopes disagree. Gradient
    /// checks use this to reroll seeds rather than difference across a kink.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for layer in &self.pre[..self.hidden_post.len()] {
            for &v in layer.data() {
                margin = margin.min(v.abs());
            }
        }
        margin
    }
}

/// Parameter gradients plus the gradient with respect to the input batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub input: Matrix,
}

impl MlpModel {
    /// Fresh model with fan-in scaled uniform weights and zero biases.
    pub fn new(layer_dims: Vec<usize>, output_head: OutputHead, rng: &mut SeededRng) -> Result<MlpModel> {
        if layer_dims.len() < 2 {
            return Err(Error::param(
                "layer_dims",
                format!("need input and output widths, got {layer_dims:?}"),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::param("layer_dims", format!("zero width in {layer_dims:?}")));
        }
        output_head.validate_width(*layer_dims.last().expect("checked non-empty"))?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| bound * (2.0 * rng.next_f64() - 1.0))
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpModel {
            layer_dims,
            weights,
            biases,
            hidden_activation: HiddenActivation::Relu,
            output_head,
        })
    }

    /// The architecture used by both the classifier and the GAN nets:
    /// three equal hidden layers between input and output.
    pub fn three_hidden(
        input_width: usize,
        hidden_units: usize,
        output_width: usize,
        output_head: OutputHead,
        rng: &mut SeededRng,
    ) -> Result<MlpModel> {
        MlpModel::new(
            vec![input_width, hidden_units, hidden_units, hidden_units, output_width],
            output_head,
            rng,
        )
    }

    /// Builds a model from explicit parameters (checkpoint load, tests).
    pub fn from_params(
        layer_dims: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        output_head: OutputHead,
    ) -> Result<MlpModel> {
        if layer_dims.len() < 2 || weights.len() != layer_dims.len() - 1 || biases.len() != weights.len() {
            return Err(Error::param(
                "layer_dims",
                format!(
                    "{} dims with {} weight and {} bias layers",
                    layer_dims.len(),
                    weights.len(),
                    biases.len()
                ),
            ));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.rows() != layer_dims[l] || w.cols() != layer_dims[l + 1] {
                return Err(Error::shape(
                    "from_params",
                    format!("{}x{}", layer_dims[l], layer_dims[l + 1]),
                    w.shape(),
                ));
            }
            if biases[l].len() != layer_dims[l + 1] {
                return Err(Error::shape(
                    "from_params",
                    format!("bias of {}", layer_dims[l + 1]),
                    format!("bias of {}", biases[l].len()),
                ));
            }
        }
        output_head.validate_width(*layer_dims.last().expect("len checked"))?;
        Ok(MlpModel {
            layer_dims,
            weights,
            biases,
            hidden_activation: HiddenActivation::Relu,
            output_head,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_width(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_dims.last().expect("dims validated")
    }

    pub fn output_head(&self) -> &OutputHead {
        &self.output_head
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Mutable access to raw weights and biases. Exists so gradient checks
    /// can perturb single parameters; training code goes through
    /// [`optimizer_step`](crate::nn::optimizer_step) instead.
    pub fn params_mut(&mut self) -> (&mut [Matrix], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    /// True if any parameter is NaN or infinite (training blew up).
    pub fn has_non_finite(&self) -> bool {
        self.weights
            .iter()
            .any(|w| w.data().iter().any(|v| !v.is_finite()))
            || self.biases.iter().flatten().any(|v| !v.is_finite())
    }

    /// Forward pass for heads that don't consume noise.
    pub fn forward(&self, batch: &Matrix) -> Result<Forward> {
        if self.output_head.requires_noise() {
            return Err(Error::Usage(
                "mixed tabular head needs gumbel noise; call forward_with_noise".into(),
            ));
        }
        self.forward_impl(batch, None)
    }

    /// Forward pass for mixed tabular heads; `noise` is standard Gumbel,
    /// one column per categorical logit, one row per batch row.
    pub fn forward_with_noise(&self, batch: &Matrix, noise: &Matrix) -> Result<Forward> {
        if !self.output_head.requires_noise() {
            return Err(Error::Usage(
                "this head does not take noise; call forward".into(),
            ));
        }
        self.forward_impl(batch, Some(noise))
    }

    fn forward_impl(&self, batch: &Matrix, noise: Option<&Matrix>) -> Result<Forward> {
        if batch.cols() != self.input_width() {
            return Err(Error::shape(
                "forward",
                format!("input width {}", self.input_width()),
                batch.shape(),
            ));
        }
        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut hidden_post = Vec::with_capacity(layers.saturating_sub(1));
        let mut a = batch.clone();
        for l in 0..layers {
            let mut z = a.matmul(&self.weights[l])?;
            z.add_row_broadcast(&self.biases[l])?;
            if l + 1 < layers {
                let activated = match self.hidden_activation {
                    HiddenActivation::Relu => z.map(|v| v.max(0.0)),
                };
                pre.push(z);
                hidden_post.push(activated.clone());
                a = activated;
            } else {
                let output = self.output_head.apply(&z, noise)?;
                pre.push(z);
                return Ok(Forward {
                    output,
                    pre,
                    hidden_post,
                    input: batch.clone(),
                    dims: self.layer_dims.clone(),
                });
            }
        }
        unreachable!("at least one layer is guaranteed by construction")
    }

    /// Backpropagates `loss_grad = dL/d(output)` through the head and
    /// every layer. `fwd` must come from a forward pass of this model on
    /// the batch the gradients are wanted for.
    pub fn backward(&self, fwd: &Forward, loss_grad: &Matrix) -> Result<Gradients> {
        if fwd.dims != self.layer_dims {
            return Err(Error::Usage(format!(
                "stale forward cache: built for dims {:?}, model has {:?}",
                fwd.dims, self.layer_dims
            )));
        }
        if loss_grad.rows() != fwd.output.rows() || loss_grad.cols() != fwd.output.cols() {
            return Err(Error::shape(
                "backward",
                fwd.output.shape(),
                loss_grad.shape(),
            ));
        }
        let layers = self.weights.len();
        let mut d_weights = vec![Matrix::zeros(0, 0); layers];
        let mut d_biases = vec![Vec::new(); layers];

        // dL/dz for the final layer, through the head.
        let mut g = self.output_head.backward(&fwd.output, loss_grad);
        for l in (0..layers).rev() {
            let layer_input = if l == 0 { &fwd.input } else { &fwd.hidden_post[l - 1] };
            d_weights[l] = layer_input.transpose().matmul(&g)?;
            let mut db = vec![0.0; g.cols()];
            for r in 0..g.rows() {
                for (acc, &v) in db.iter_mut().zip(g.row(r)) {
                    *acc += v;
                }
            }
            d_biases[l] = db;
            let upstream = g.matmul(&self.weights[l].transpose())?;
            if l > 0 {
                // ReLU gate: pass gradient only where the unit fired.
                let z = &fwd.pre[l - 1];
                let mut gated = upstream;
                for (gv, &zv) in gated.data_mut().iter_mut().zip(z.data()) {
                    if zv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                g = gated;
            } else {
                return Ok(Gradients {
                    weights: d_weights,
                    biases: d_biases,
                    input: upstream,
                });
            }
        }
        unreachable!("loop returns at l == 0")
    }
}
