//! Output heads and the Gumbel-Softmax reparameterization.
//!
//! A head maps the final dense layer's pre-activation to the network
//! output. `MixedTabular` is the generator head for encoded table rows:
//! the leading columns are numeric features squashed through a sigmoid
//! (encoded numerics live in `[0, 1]`), followed by one block per
//! categorical column, each pushed through Gumbel-Softmax so that a
//! one-hot-like sample stays differentiable with respect to its logits.
//! Conceptually that is a dense layer per categorical variable in
//! parallel with the numeric outputs, fused into one dense layer whose
//! output is partitioned by block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBlock {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedTabularHead {
    /// Number of leading numeric output columns.
    pub numeric_width: usize,
    /// One block per categorical column, in output order.
    pub categorical_blocks: Vec<CategoricalBlock>,
    /// Gumbel-Softmax temperature, constant over training.
    pub temperature: f64,
}

impl MixedTabularHead {
    pub fn categorical_width(&self) -> usize {
        self.categorical_blocks.iter().map(|b| b.cardinality).sum()
    }

    /// Total output width: numeric columns plus all block cardinalities.
    pub fn width(&self) -> usize {
        self.numeric_width + self.categorical_width()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::param(
                "temperature",
                format!("must be positive, got {}", self.temperature),
            ));
        }
        if let Some(b) = self.categorical_blocks.iter().find(|b| b.cardinality == 0) {
            return Err(Error::param(
                "categorical_blocks",
                format!("block {:?} has cardinality 0", b.name),
            ));
        }
        if self.width() == 0 {
            return Err(Error::param("output_head", "mixed head has zero width"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputHead {
    /// Elementwise logistic; binary classifier output.
    Sigmoid,
    /// Row-wise softmax over the full output width.
    Softmax,
    /// Identity.
    Linear,
    /// Mixed numeric + categorical generator output (see module docs).
    MixedTabular(MixedTabularHead),
}

impl OutputHead {
    /// Mixed heads consume one Gumbel draw per categorical logit.
    pub fn requires_noise(&self) -> bool {
        matches!(self, OutputHead::MixedTabular(_))
    }

    pub(crate) fn validate_width(&self, trunk_out: usize) -> Result<()> {
        match self {
            OutputHead::MixedTabular(h) => {
                h.validate()?;
                if h.width() != trunk_out {
                    return Err(Error::shape(
                        "output head",
                        format!("head width {}", h.width()),
                        format!("final layer width {trunk_out}"),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Maps the final pre-activation `z` to the output. `noise` must be
    /// `rows x categorical_width` for mixed heads and `None` otherwise.
    pub(crate) fn apply(&self, z: &Matrix, noise: Option<&Matrix>) -> Result<Matrix> {
        match self {
            OutputHead::Sigmoid => Ok(z.map(sigmoid)),
            OutputHead::Linear => Ok(z.clone()),
            OutputHead::Softmax => {
                let mut y = z.clone();
                for r in 0..y.rows() {
                    softmax_in_place(y.row_mut(r));
                }
                Ok(y)
            }
            OutputHead::MixedTabular(h) => {
                let noise = noise.ok_or_else(|| {
                    Error::Usage("mixed tabular head needs gumbel noise".into())
                })?;
                if noise.rows() != z.rows() || noise.cols() != h.categorical_width() {
                    return Err(Error::shape(
                        "gumbel noise",
                        format!("{}x{}", z.rows(), h.categorical_width()),
                        noise.shape(),
                    ));
                }
                let mut y = Matrix::zeros(z.rows(), z.cols());
                for r in 0..z.rows() {
                    let zr = z.row(r);
                    let nr = noise.row(r);
                    let yr = y.row_mut(r);
                    for c in 0..h.numeric_width {
                        yr[c] = sigmoid(zr[c]);
                    }
                    let mut at = h.numeric_width;
                    let mut noise_at = 0;
                    for b in &h.categorical_blocks {
                        for k in 0..b.cardinality {
                            yr[at + k] = (zr[at + k] + nr[noise_at + k]) / h.temperature;
                        }
                        softmax_in_place(&mut yr[at..at + b.cardinality]);
                        at += b.cardinality;
                        noise_at += b.cardinality;
                    }
                }
                Ok(y)
            }
        }
    }

    /// Pulls `upstream = dL/dy` back through the head to `dL/dz`, given
    /// the head output `y` from the same forward pass.
    pub(crate) fn backward(&self, y: &Matrix, upstream: &Matrix) -> Matrix {
        match self {
            OutputHead::Linear => upstream.clone(),
            OutputHead::Sigmoid => {
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for ((gv, &yv), &uv) in
                    g.data_mut().iter_mut().zip(y.data()).zip(upstream.data())
                {
                    *gv = uv * yv * (1.0 - yv);
                }
                g
            }
            OutputHead::Softmax => {
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    softmax_backward_block(y.row(r), upstream.row(r), g.row_mut(r), 1.0);
                }
                g
            }
            OutputHead::MixedTabular(h) => {
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let ur = upstream.row(r);
                    let gr = g.row_mut(r);
                    for c in 0..h.numeric_width {
                        gr[c] = ur[c] * yr[c] * (1.0 - yr[c]);
                    }
                    let mut at = h.numeric_width;
                    for b in &h.categorical_blocks {
                        softmax_backward_block(
                            &yr[at..at + b.cardinality],
                            &ur[at..at + b.cardinality],
                            &mut gr[at..at + b.cardinality],
                            1.0 / h.temperature,
                        );
                        at += b.cardinality;
                    }
                }
                g
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable in-place softmax.
fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// dL/dz for one softmax block: `scale * y ⊙ (u - <u, y>)`.
fn softmax_backward_block(y: &[f64], u: &[f64], out: &mut [f64], scale: f64) {
    let dot: f64 = y.iter().zip(u).map(|(a, b)| a * b).sum();
    for ((o, &yv), &uv) in out.iter_mut().zip(y).zip(u) {
        *o = scale * yv * (uv - dot);
    }
}

/// Softmax of `(logits + gumbel_noise) / temperature` with noise drawn
/// from `rng`. The low-temperature limit approaches a one-hot sample of
/// the categorical law `softmax(logits)`.
pub fn gumbel_softmax(logits: &[f64], temperature: f64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let noise: Vec<f64> = (0..logits.len()).map(|_| rng.next_gumbel()).collect();
    gumbel_softmax_with_noise(logits, &noise, temperature)
}

/// Deterministic seam of [`gumbel_softmax`]: the caller supplies noise.
pub fn gumbel_softmax_with_noise(
    logits: &[f64],
    noise: &[f64],
    temperature: f64,
) -> Result<Vec<f64>> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::param(
            "temperature",
            format!("must be positive, got {temperature}"),
        ));
    }
    if logits.is_empty() {
        return Err(Error::param("logits", "must be non-empty"));
    }
    if logits.len() != noise.len() {
        return Err(Error::shape(
            "gumbel_softmax",
            format!("{} logits", logits.len()),
            format!("{} noise values", noise.len()),
        ));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(&l, &g)| (l + g) / temperature)
        .collect();
    softmax_in_place(&mut out);
    Ok(out)
}
