//! Layout translation between the generator's output, full encoded rows, and
//! the condition vector that tells both networks which population group a
//! row belongs to.
//!
//! The generator does not emit columns the group predicate pins to a single
//! value; those are stamped from the predicate when a generated row is
//! assembled. Its output is laid out as every unpinned numeric column in
//! schema order, followed by one softmax block per unpinned categorical
//! column in schema order. The condition vector holds one block per
//! sensitive column: a one-hot of the pinned value where the predicate
//! constrains the column, zeros where it does not.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Encoder, GroupPredicate};
use crate::error::{Error, Result};
use crate::nn::{CategoricalBlock, MixedTabularHead};
use crate::numerics::Matrix;

/// Resolved layout for one (schema, group predicate) pair.
#[derive(Debug, Clone)]
pub struct GanCodec {
    encoder: Encoder,
    predicate: GroupPredicate,
    /// (column, value) pairs the predicate pins.
    fixed: Vec<(usize, usize)>,
    /// Unpinned numeric columns, schema order.
    gen_numeric: Vec<usize>,
    /// Unpinned categorical columns, schema order.
    gen_categorical: Vec<usize>,
    /// Per sensitive column: (column, offset into the condition vector).
    cond_blocks: Vec<(usize, usize)>,
    cond_width: usize,
}

impl GanCodec {
    pub fn new(encoder: Encoder, predicate: GroupPredicate) -> Result<GanCodec> {
        let bound = predicate.bind(encoder.schema())?;
        let fixed: Vec<(usize, usize)> = bound.pairs().to_vec();
        let schema = encoder.schema();

        let mut gen_numeric = Vec::new();
        let mut gen_categorical = Vec::new();
        for (c, col) in schema.columns().iter().enumerate() {
            if fixed.iter().any(|&(fc, _)| fc == c) {
                continue;
            }
            match col.kind {
                ColumnKind::Numeric => gen_numeric.push(c),
                ColumnKind::Categorical(_) => gen_categorical.push(c),
            }
        }
        if gen_numeric.is_empty() && gen_categorical.is_empty() {
            return Err(Error::param("group", "predicate pins every column; nothing to generate"));
        }

        let mut cond_blocks = Vec::new();
        let mut cond_width = 0;
        for c in schema.sensitive_indices() {
            cond_blocks.push((c, cond_width));
            cond_width += schema.column(c).kind.encoded_width();
        }
        if cond_width == 0 {
            return Err(Error::param("schema", "no sensitive columns to condition on"));
        }

        Ok(GanCodec { encoder, predicate, fixed, gen_numeric, gen_categorical, cond_blocks, cond_width })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn predicate(&self) -> &GroupPredicate {
        &self.predicate
    }

    /// Width of one generated row.
    pub fn gen_output_width(&self) -> usize {
        let schema = self.encoder.schema();
        self.gen_numeric.len()
            + self
                .gen_categorical
                .iter()
                .map(|&c| schema.column(c).kind.encoded_width())
                .sum::<usize>()
    }

    /// Width of the condition vector.
    pub fn cond_width(&self) -> usize {
        self.cond_width
    }

    /// Discriminator input width: a full encoded row plus the condition.
    pub fn dis_input_width(&self) -> usize {
        self.encoder.width() + self.cond_width
    }

    /// Output head matching the generated layout.
    pub fn head(&self, temperature: f64) -> MixedTabularHead {
        let schema = self.encoder.schema();
        let blocks = self
            .gen_categorical
            .iter()
            .map(|&c| CategoricalBlock {
                name: schema.column(c).name.clone(),
                cardinality: schema.column(c).kind.encoded_width(),
            })
            .collect();
        MixedTabularHead {
            numeric_width: self.gen_numeric.len(),
            categorical_blocks: blocks,
            temperature,
        }
    }

    /// The condition vector for this codec's group: one-hots for pinned
    /// sensitive columns, zeros for unconstrained ones.
    pub fn condition(&self) -> Vec<f64> {
        let mut cond = vec![0.0; self.cond_width];
        for &(col, offset) in &self.cond_blocks {
            if let Some(&(_, value)) = self.fixed.iter().find(|&&(fc, _)| fc == col) {
                cond[offset + value] = 1.0;
            }
        }
        cond
    }

    /// Half-open range each generated column block occupies in the
    /// generator's output, keyed by schema column index.
    fn gen_block_range(&self, col: usize) -> Option<(usize, usize)> {
        let schema = self.encoder.schema();
        if let Some(pos) = self.gen_numeric.iter().position(|&c| c == col) {
            return Some((pos, pos + 1));
        }
        let mut at = self.gen_numeric.len();
        for &c in &self.gen_categorical {
            let w = schema.column(c).kind.encoded_width();
            if c == col {
                return Some((at, at + w));
            }
            at += w;
        }
        None
    }

    /// Expands generated rows to full encoded width, stamping pinned columns
    /// with their one-hot values.
    pub fn assemble_full(&self, gen_out: &Matrix) -> Result<Matrix> {
        if gen_out.cols() != self.gen_output_width() {
            return Err(Error::shape(
                "assemble_full",
                format!("_x{}", self.gen_output_width()),
                gen_out.shape(),
            ));
        }
        let schema = self.encoder.schema();
        let mut full = Matrix::zeros(gen_out.rows(), self.encoder.width());
        for r in 0..gen_out.rows() {
            let src = gen_out.row(r);
            let dest = full.row_mut(r);
            for c in 0..schema.len() {
                let (fs, fe) = self.encoder.block_range(c);
                if let Some((gs, ge)) = self.gen_block_range(c) {
                    dest[fs..fe].copy_from_slice(&src[gs..ge]);
                } else {
                    let (_, value) = self.fixed.iter().find(|&&(fc, _)| fc == c).expect("pinned");
                    dest[fs + value] = 1.0;
                }
            }
        }
        Ok(full)
    }

    /// Projects full encoded rows down to the generated columns, for
    /// comparing real rows with generator output.
    pub fn slice_generated(&self, full: &Matrix) -> Result<Matrix> {
        if full.cols() != self.encoder.width() {
            return Err(Error::shape(
                "slice_generated",
                format!("_x{}", self.encoder.width()),
                full.shape(),
            ));
        }
        let schema = self.encoder.schema();
        let mut out = Matrix::zeros(full.rows(), self.gen_output_width());
        for r in 0..full.rows() {
            let src = full.row(r);
            let dest = out.row_mut(r);
            for c in 0..schema.len() {
                if let Some((gs, ge)) = self.gen_block_range(c) {
                    let (fs, fe) = self.encoder.block_range(c);
                    dest[gs..ge].copy_from_slice(&src[fs..fe]);
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`GanCodec::assemble_full`] on the gradient side: extracts
    /// the columns of a full-width upstream gradient that flow back into the
    /// generator (pinned stamps carry no gradient).
    pub fn slice_upstream(&self, full_grad: &Matrix) -> Result<Matrix> {
        self.slice_generated(full_grad)
    }

    /// Appends the group condition to each row, forming discriminator input.
    pub fn with_condition(&self, full: &Matrix) -> Result<Matrix> {
        if full.cols() != self.encoder.width() {
            return Err(Error::shape(
                "with_condition",
                format!("_x{}", self.encoder.width()),
                full.shape(),
            ));
        }
        let cond = self.condition();
        let mut out = Matrix::zeros(full.rows(), self.dis_input_width());
        for r in 0..full.rows() {
            let dest = out.row_mut(r);
            dest[..full.cols()].copy_from_slice(full.row(r));
            dest[full.cols()..].copy_from_slice(&cond);
        }
        Ok(out)
    }
}

/// Hyperparameters for adversarial training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanHyper {
    /// Real samples per round.
    pub n1: usize,
    /// Noise samples per round.
    pub n2: usize,
    /// Discriminator ascent steps per round.
    pub k_steps: usize,
    /// Dual step size for the density targets.
    pub beta: f64,
    /// Kernel bandwidth; measured from data when absent.
    pub sigma: Option<f64>,
    /// Training rounds.
    pub epsilon_rounds: usize,
    /// Width of the generator's noise input.
    pub noise_dim: usize,
    /// Hidden layer width for both networks.
    pub hidden_units: usize,
    pub lr_gen: f64,
    pub lr_dis: f64,
    /// Gumbel-Softmax temperature for categorical outputs.
    pub temperature: f64,
    /// Use the normalized Gaussian kernel in the density estimate.
    pub kernel_normalized: bool,
}

impl Default for GanHyper {
    fn default() -> GanHyper {
        GanHyper {
            n1: 256,
            n2: 256,
            k_steps: 2,
            beta: 0.1,
            sigma: None,
            epsilon_rounds: 2000,
            noise_dim: 32,
            hidden_units: 64,
            lr_gen: 1e-3,
            lr_dis: 1e-3,
            temperature: 0.5,
            kernel_normalized: false,
        }
    }
}

impl GanHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n1", self.n1), ("n2", self.n2), ("k_steps", self.k_steps)] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        for (name, v) in [("noise_dim", self.noise_dim), ("hidden_units", self.hidden_units)] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if self.epsilon_rounds == 0 {
            return Err(Error::param("epsilon_rounds", "must be at least 1"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::param("beta", format!("must be non-negative, got {}", self.beta)));
        }
        if let Some(s) = self.sigma {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::param("sigma", format!("must be positive, got {s}")));
            }
        }
        for (name, v) in [("lr_gen", self.lr_gen), ("lr_dis", self.lr_dis)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::param(
                "temperature",
                format!("must be positive, got {}", self.temperature),
            ));
        }
        Ok(())
    }
}
