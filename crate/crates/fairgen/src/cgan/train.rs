//! Adversarial training of the conditional generator.
//!
//! Each round draws one minibatch of real rows from the target group and one
//! batch of noise, runs `k_steps` of discriminator ascent, then takes a
//! single generator descent step. Under [`TrainAlgorithm::PrimalDual`] the
//! generator's loss adds a density-matching penalty: per-sample targets are
//! nudged by a dual update that prices how well the discriminator separates
//! real from fake, and the generator is pulled toward producing a kernel
//! density estimate that meets those targets. [`TrainAlgorithm::Standard`]
//! keeps only the adversarial term.

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetTable, GroupPredicate, Provenance};
use crate::error::{Error, Result};
use crate::nn::{optimizer_step, Gradients, MlpModel, OptimizerState, OutputHead};
use crate::numerics::{sample_gaussian, sample_gumbel, Matrix, SeededRng};

use super::codec::{GanCodec, GanHyper};
use super::kernel::{dual_update, estimate_pgen, gaussian_kernel, median_sigma, DIS_CLAMP};

/// Which generator objective to train with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainAlgorithm {
    /// Adversarial term plus the dual-guided density penalty.
    PrimalDual,
    /// Adversarial term only.
    Standard,
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub dis_loss: f64,
    pub gen_loss: f64,
    pub mean_dis_real: f64,
    pub mean_dis_fake: f64,
}

/// Full training history, one row per round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainingTrace {
    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["round", "dis_loss", "gen_loss", "mean_dis_real", "mean_dis_fake"])?;
        for row in &self.rows {
            writer.write_record([
                row.round.to_string(),
                crate::dataset::format_numeric(row.dis_loss),
                crate::dataset::format_numeric(row.gen_loss),
                crate::dataset::format_numeric(row.mean_dis_real),
                crate::dataset::format_numeric(row.mean_dis_fake),
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::param("csv", e.to_string()))?;
        crate::artifact::atomic_write(path, &bytes)
    }
}

/// Generator, discriminator, and everything needed to keep training them on
/// one population group.
pub struct GanState {
    codec: GanCodec,
    hyper: GanHyper,
    algorithm: TrainAlgorithm,
    gen: MlpModel,
    dis: MlpModel,
    gen_opt: OptimizerState,
    dis_opt: OptimizerState,
    /// Encoded rows of the target group, full width. Empty after a
    /// checkpoint load; generation works, further training does not.
    real_full: Matrix,
    /// The same rows projected onto the generated columns.
    real_slices: Matrix,
    sigma: Option<f64>,
    rounds_trained: usize,
    rng: SeededRng,
    seed: u64,
}

impl GanState {
    /// Builds fresh networks for the rows of `table` matching `group`.
    ///
    /// The encoder is fitted on the group's rows, so generated numerics decode
    /// into the group's observed range. Errors if fewer than two rows match.
    pub fn new(
        table: &DatasetTable,
        group: GroupPredicate,
        hyper: GanHyper,
        algorithm: TrainAlgorithm,
        seed: u64,
    ) -> Result<GanState> {
        hyper.validate()?;
        let indices = table.filter(&group)?;
        if indices.len() < 2 {
            return Err(Error::InsufficientRows {
                predicate: group.to_string(),
                needed: 2,
                available: indices.len(),
            });
        }
        let subset = table.subset(&indices);
        let encoder = crate::dataset::Encoder::fit(&subset)?;
        let codec = GanCodec::new(encoder, group)?;

        let mut rng = SeededRng::new(seed);
        let head = OutputHead::MixedTabular(codec.head(hyper.temperature));
        let gen = MlpModel::three_hidden(
            hyper.noise_dim + codec.cond_width(),
            hyper.hidden_units,
            codec.gen_output_width(),
            head,
            &mut rng,
        )?;
        let dis = MlpModel::three_hidden(
            codec.dis_input_width(),
            hyper.hidden_units,
            1,
            OutputHead::Sigmoid,
            &mut rng,
        )?;
        let gen_opt = OptimizerState::adam(hyper.lr_gen)?;
        let dis_opt = OptimizerState::adam(hyper.lr_dis)?;

        let real_full = codec.encoder().encode(&subset)?;
        let real_slices = codec.slice_generated(&real_full)?;
        let sigma = hyper.sigma;

        Ok(GanState {
            codec,
            hyper,
            algorithm,
            gen,
            dis,
            gen_opt,
            dis_opt,
            real_full,
            real_slices,
            sigma,
            rounds_trained: 0,
            rng,
            seed,
        })
    }

    #[allow(clippy::too_many_arguments)] // checkpoint reassembly mirrors the stored fields
    pub(crate) fn from_parts(
        codec: GanCodec,
        hyper: GanHyper,
        algorithm: TrainAlgorithm,
        gen: MlpModel,
        dis: MlpModel,
        sigma: Option<f64>,
        rounds_trained: usize,
        seed: u64,
    ) -> Result<GanState> {
        let gen_opt = OptimizerState::adam(hyper.lr_gen)?;
        let dis_opt = OptimizerState::adam(hyper.lr_dis)?;
        let width = codec.encoder().width();
        let gen_width = codec.gen_output_width();
        Ok(GanState {
            codec,
            hyper,
            algorithm,
            gen,
            dis,
            gen_opt,
            dis_opt,
            real_full: Matrix::zeros(0, width),
            real_slices: Matrix::zeros(0, gen_width),
            sigma,
            rounds_trained,
            rng: SeededRng::new(seed),
            seed,
        })
    }

    pub fn codec(&self) -> &GanCodec {
        &self.codec
    }

    pub fn hyper(&self) -> &GanHyper {
        &self.hyper
    }

    pub fn algorithm(&self) -> TrainAlgorithm {
        self.algorithm
    }

    pub fn generator(&self) -> &MlpModel {
        &self.gen
    }

    pub fn discriminator(&self) -> &MlpModel {
        &self.dis
    }

    /// Kernel bandwidth in use; measured from the first minibatch when the
    /// hyperparameters leave it unset.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn rounds_trained(&self) -> usize {
        self.rounds_trained
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Encoder warnings gathered while fitting on the group's rows.
    pub fn encoder_warnings(&self) -> &[String] {
        self.codec.encoder().warnings()
    }

    /// Rows of training data available, zero for checkpoint-loaded states.
    pub fn n_real(&self) -> usize {
        self.real_full.rows()
    }

    /// Runs `hyper.epsilon_rounds` training rounds.
    pub fn train(&mut self) -> Result<TrainingTrace> {
        let mut trace = TrainingTrace::default();
        trace.rows.reserve(self.hyper.epsilon_rounds);
        for _ in 0..self.hyper.epsilon_rounds {
            trace.rows.push(self.round_step()?);
        }
        Ok(trace)
    }

    /// One training round: sample, `k_steps` of discriminator ascent, dual
    /// update, one generator descent step.
    pub fn round_step(&mut self) -> Result<TraceRow> {
        if self.real_full.rows() == 0 {
            return Err(Error::Usage(
                "this state was loaded from a checkpoint without training data; it can generate but not train".into(),
            ));
        }
        let n1 = self.hyper.n1;
        let n2 = self.hyper.n2;

        // Minibatches: real rows with replacement, fresh noise.
        let picks: Vec<usize> = (0..n1).map(|_| self.rng.next_below(self.real_full.rows())).collect();
        let real_batch_full = gather_rows(&self.real_full, &picks);
        let real_batch_slices = gather_rows(&self.real_slices, &picks);
        let noise = sample_gaussian(&mut self.rng, n2, self.hyper.noise_dim, 0.0, 1.0)?;
        let gumbel = sample_gumbel(&mut self.rng, n2, gumbel_width(&self.gen));
        let gen_in = self.codec.gen_input(&noise)?;

        // Bandwidth comes from the first real minibatch and then stays fixed.
        if self.sigma.is_none() {
            self.sigma = Some(median_sigma(&real_batch_slices)?);
        }
        let sigma = self.sigma.expect("resolved above");

        // The generator is frozen during discriminator ascent, so its output
        // batch is computed once.
        let fwd_g = self.gen.forward_with_noise(&gen_in, &gumbel)?;
        let fake_full = self.codec.assemble_full(fwd_g.output())?;
        let dis_in_real = self.codec.with_condition(&real_batch_full)?;
        let dis_in_fake = self.codec.with_condition(&fake_full)?;
        for _ in 0..self.hyper.k_steps {
            let (_, grads) = dis_objective_grads(&self.dis, &dis_in_real, &dis_in_fake)?;
            optimizer_step(&mut self.dis_opt, &mut self.dis, &grads, true)?;
        }
        // Post-update outputs feed the trace and the dual step.
        let dis_eval = dis_objective(&self.dis, &dis_in_real, &dis_in_fake)?;

        let penalty_targets = match self.algorithm {
            TrainAlgorithm::PrimalDual => {
                let fake_slices = self.codec.slice_generated(&fake_full)?;
                let p = estimate_pgen(&fake_slices, &real_batch_slices, sigma, self.hyper.kernel_normalized)?;
                Some(dual_update(&p, &dis_eval.real_outputs, self.hyper.beta)?)
            }
            TrainAlgorithm::Standard => None,
        };
        let penalty = penalty_targets.as_ref().map(|p_tilde| KdePenalty {
            real_slices: &real_batch_slices,
            p_tilde,
            sigma,
            normalized: self.hyper.kernel_normalized,
        });
        let (gen_eval, gen_grads) =
            gen_composite_grads(&self.gen, &self.dis, &self.codec, &gen_in, &gumbel, penalty.as_ref())?;
        optimizer_step(&mut self.gen_opt, &mut self.gen, &gen_grads, false)?;

        if self.gen.has_non_finite() || self.dis.has_non_finite() {
            return Err(Error::Diverged { epoch: self.rounds_trained });
        }

        let row = TraceRow {
            round: self.rounds_trained,
            dis_loss: dis_eval.loss,
            gen_loss: gen_eval.loss,
            mean_dis_real: mean(&dis_eval.real_outputs),
            mean_dis_fake: mean(&dis_eval.fake_outputs),
        };
        self.rounds_trained += 1;
        Ok(row)
    }

    /// Draws `count` synthetic rows for the state's group.
    ///
    /// The RNG is caller-supplied so generation is reproducible independently
    /// of training. Errors if the state has never been trained.
    pub fn generate(&self, count: usize, rng: &mut SeededRng) -> Result<DatasetTable> {
        if self.rounds_trained == 0 {
            return Err(Error::Usage("the generator is untrained; run training before generating".into()));
        }
        if count == 0 {
            return Err(Error::param("count", "must be at least 1"));
        }
        let noise = sample_gaussian(rng, count, self.hyper.noise_dim, 0.0, 1.0)?;
        let gumbel = sample_gumbel(rng, count, gumbel_width(&self.gen));
        let gen_in = self.codec.gen_input(&noise)?;
        let fwd = self.gen.forward_with_noise(&gen_in, &gumbel)?;
        let full = self.codec.assemble_full(fwd.output())?;
        let rows = self.codec.encoder().decode_rows(&full, Provenance::Synthetic)?;
        let mut table = DatasetTable::new(self.codec.encoder().schema().clone());
        for row in rows {
            table.push_row(row)?;
        }
        Ok(table)
    }
}

impl GanCodec {
    /// Generator input: noise columns followed by the group condition.
    pub fn gen_input(&self, noise: &Matrix) -> Result<Matrix> {
        let cond = self.condition();
        let mut out = Matrix::zeros(noise.rows(), noise.cols() + cond.len());
        for r in 0..noise.rows() {
            let dest = out.row_mut(r);
            dest[..noise.cols()].copy_from_slice(noise.row(r));
            dest[noise.cols()..].copy_from_slice(&cond);
        }
        Ok(out)
    }
}

fn gumbel_width(gen: &MlpModel) -> usize {
    match gen.output_head() {
        OutputHead::MixedTabular(h) => h.categorical_width(),
        _ => 0,
    }
}

fn gather_rows(m: &Matrix, picks: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(picks.len(), m.cols());
    for (r, &i) in picks.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Discriminator objective value and raw outputs on both batches.
#[derive(Debug, Clone)]
pub struct DisEval {
    /// `(1/n1) sum ln d_i + (1/n2) sum ln(1 - e_j)`, the quantity ascent
    /// pushes up.
    pub loss: f64,
    pub real_outputs: Vec<f64>,
    pub fake_outputs: Vec<f64>,
}

fn column_outputs(fwd: &crate::nn::Forward) -> Vec<f64> {
    (0..fwd.output().rows()).map(|r| fwd.output().get(r, 0)).collect()
}

/// Evaluates the discriminator objective without touching gradients.
pub fn dis_objective(dis: &MlpModel, real_in: &Matrix, fake_in: &Matrix) -> Result<DisEval> {
    let real = column_outputs(&dis.forward(real_in)?);
    let fake = column_outputs(&dis.forward(fake_in)?);
    Ok(dis_eval_from_outputs(real, fake))
}

fn dis_eval_from_outputs(real: Vec<f64>, fake: Vec<f64>) -> DisEval {
    let n1 = real.len() as f64;
    let n2 = fake.len() as f64;
    let real_term: f64 = real.iter().map(|&d| d.clamp(DIS_CLAMP, 1.0 - DIS_CLAMP).ln()).sum();
    let fake_term: f64 =
        fake.iter().map(|&e| (1.0 - e.clamp(DIS_CLAMP, 1.0 - DIS_CLAMP)).ln()).sum();
    DisEval { loss: real_term / n1 + fake_term / n2, real_outputs: real, fake_outputs: fake }
}

/// Objective plus parameter gradients, summed over the real and fake passes.
///
/// The returned `input` gradient is the fake batch's: real rows are data, so
/// only the fake side has anything upstream to receive it.
pub fn dis_objective_grads(
    dis: &MlpModel,
    real_in: &Matrix,
    fake_in: &Matrix,
) -> Result<(DisEval, Gradients)> {
    let fwd_real = dis.forward(real_in)?;
    let fwd_fake = dis.forward(fake_in)?;
    let real = column_outputs(&fwd_real);
    let fake = column_outputs(&fwd_fake);
    let n1 = real.len() as f64;
    let n2 = fake.len() as f64;

    // d/dd of (1/n1) ln d; zero where the clamp binds.
    let mut grad_real = Matrix::zeros(real.len(), 1);
    for (i, &d) in real.iter().enumerate() {
        if d > DIS_CLAMP && d < 1.0 - DIS_CLAMP {
            grad_real.set(i, 0, 1.0 / (n1 * d));
        }
    }
    let mut grad_fake = Matrix::zeros(fake.len(), 1);
    for (j, &e) in fake.iter().enumerate() {
        if e > DIS_CLAMP && e < 1.0 - DIS_CLAMP {
            grad_fake.set(j, 0, -1.0 / (n2 * (1.0 - e)));
        }
    }

    let g_real = dis.backward(&fwd_real, &grad_real)?;
    let mut g_fake = dis.backward(&fwd_fake, &grad_fake)?;
    for (a, b) in g_fake.weights.iter_mut().zip(&g_real.weights) {
        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
            *x += y;
        }
    }
    for (a, b) in g_fake.biases.iter_mut().zip(&g_real.biases) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
    Ok((dis_eval_from_outputs(real, fake), g_fake))
}

/// Density-matching penalty inputs for the generator step.
#[derive(Debug, Clone)]
pub struct KdePenalty<'a> {
    /// Real minibatch projected onto the generated columns.
    pub real_slices: &'a Matrix,
    /// Frozen per-sample density targets from the dual update.
    pub p_tilde: &'a [f64],
    pub sigma: f64,
    pub normalized: bool,
}

/// Generator loss decomposition.
#[derive(Debug, Clone, Copy)]
pub struct GenEval {
    /// `adversarial + penalty`.
    pub loss: f64,
    /// `(1/n2) sum ln(1 - D(assembled fake))`.
    pub adversarial: f64,
    /// `(1/n1) sum (p_tilde_i - p_i)^2`, zero without a penalty.
    pub penalty: f64,
}

/// Evaluates the generator's composite loss for fixed noise.
pub fn gen_composite_loss(
    gen: &MlpModel,
    dis: &MlpModel,
    codec: &GanCodec,
    gen_in: &Matrix,
    gumbel: &Matrix,
    penalty: Option<&KdePenalty>,
) -> Result<GenEval> {
    let fwd_g = gen.forward_with_noise(gen_in, gumbel)?;
    let full = codec.assemble_full(fwd_g.output())?;
    let outputs = column_outputs(&dis.forward(&codec.with_condition(&full)?)?);
    let n2 = outputs.len() as f64;
    let adversarial =
        outputs.iter().map(|&e| (1.0 - e.clamp(DIS_CLAMP, 1.0 - DIS_CLAMP)).ln()).sum::<f64>() / n2;
    let pen = match penalty {
        Some(k) => {
            let p = estimate_pgen(fwd_g.output(), k.real_slices, k.sigma, k.normalized)?;
            let n1 = p.len() as f64;
            p.iter().zip(k.p_tilde).map(|(&pi, &ti)| (ti - pi) * (ti - pi)).sum::<f64>() / n1
        }
        None => 0.0,
    };
    Ok(GenEval { loss: adversarial + pen, adversarial, penalty: pen })
}

/// Composite loss plus generator parameter gradients.
///
/// Two terms flow into the generator output: the adversarial gradient routed
/// back through the frozen discriminator, and the kernel density estimate's
/// dependence on where the generated points sit.
pub fn gen_composite_grads(
    gen: &MlpModel,
    dis: &MlpModel,
    codec: &GanCodec,
    gen_in: &Matrix,
    gumbel: &Matrix,
    penalty: Option<&KdePenalty>,
) -> Result<(GenEval, Gradients)> {
    let fwd_g = gen.forward_with_noise(gen_in, gumbel)?;
    let y = fwd_g.output();
    let full = codec.assemble_full(y)?;
    let dis_in = codec.with_condition(&full)?;
    let fwd_d = dis.forward(&dis_in)?;
    let outputs = column_outputs(&fwd_d);
    let n2 = outputs.len() as f64;

    let adversarial =
        outputs.iter().map(|&e| (1.0 - e.clamp(DIS_CLAMP, 1.0 - DIS_CLAMP)).ln()).sum::<f64>() / n2;
    let mut grad_out = Matrix::zeros(outputs.len(), 1);
    for (j, &e) in outputs.iter().enumerate() {
        if e > DIS_CLAMP && e < 1.0 - DIS_CLAMP {
            grad_out.set(j, 0, -1.0 / (n2 * (1.0 - e)));
        }
    }
    // Route through the frozen discriminator down to its inputs, then keep
    // only the columns the generator produced.
    let dis_grads = dis.backward(&fwd_d, &grad_out)?;
    let full_grad = dis_grads.input.slice_cols(0, codec.encoder().width())?;
    let mut upstream = codec.slice_upstream(&full_grad)?;

    let mut pen = 0.0;
    if let Some(k) = penalty {
        let p = estimate_pgen(y, k.real_slices, k.sigma, k.normalized)?;
        let n1 = p.len() as f64;
        pen = p.iter().zip(k.p_tilde).map(|(&pi, &ti)| (ti - pi) * (ti - pi)).sum::<f64>() / n1;

        // d pen / d y_j = (2 / (n1 n2 sigma^2)) sum_i (pt_i - p_i) k_ij (y_j - x_i).
        let s2 = k.sigma * k.sigma;
        let scale = 2.0 / (n1 * n2 * s2);
        let mut diff = vec![0.0; y.cols()];
        for j in 0..y.rows() {
            let yj = y.row(j);
            for (i, (&ti, &pi)) in k.p_tilde.iter().zip(&p).enumerate() {
                let xi = k.real_slices.row(i);
                for (d, slot) in diff.iter_mut().enumerate() {
                    *slot = yj[d] - xi[d];
                }
                let kij = gaussian_kernel(&diff, k.sigma, k.normalized);
                let coeff = scale * (ti - pi) * kij;
                let dest = upstream.row_mut(j);
                for (d, &u) in diff.iter().enumerate() {
                    dest[d] += coeff * u;
                }
            }
        }
    }

    let grads = gen.backward(&fwd_g, &upstream)?;
    Ok((GenEval { loss: adversarial + pen, adversarial, penalty: pen }, grads))
}
