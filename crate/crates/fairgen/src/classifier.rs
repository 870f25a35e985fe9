//! Downstream MLP classifier: minibatch cross-entropy training with early
//! stopping on a held-out validation slice, plus repeated-seed evaluation
//! that reports 95% confidence intervals overall and per population group.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bias::{self, accuracy_with_ci, GroupAccuracy};
use crate::dataset::{DatasetTable, Encoder, GroupPredicate, NumericBounds, Schema};
use crate::error::{Error, Result};
use crate::nn::{bce_loss, optimizer_step, MlpModel, ModelCheckpoint, OptimizerState, OutputHead};
use crate::numerics::{Matrix, SeededRng};

/// Training settings. Epoch counts and learning rates are deliberate
/// defaults, not reproductions of any published run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Fraction of the training table held out for early stopping; 0
    /// disables the holdout and trains for the full epoch budget.
    pub val_fraction: f64,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> ClassifierConfig {
        ClassifierConfig {
            hidden_units: 300,
            epochs: 100,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 64,
            val_fraction: 0.2,
            patience: 10,
            seed: 42,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::param("hidden_units", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::param("lr", format!("must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", format!("must be in [0, 1), got {}", self.momentum)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::param(
                "val_fraction",
                format!("must be in [0, 1), got {}", self.val_fraction),
            ));
        }
        Ok(())
    }
}

/// A trained model together with the encoder that defines its input space.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    model: MlpModel,
    encoder: Encoder,
    epochs_run: usize,
    best_val_accuracy: Option<f64>,
}

impl TrainedClassifier {
    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn into_parts(self) -> (MlpModel, Encoder) {
        (self.model, self.encoder)
    }

    pub fn from_parts(model: MlpModel, encoder: Encoder) -> Result<TrainedClassifier> {
        if model.input_width() != encoder.feature_width() {
            return Err(Error::shape(
                "classifier",
                format!("model input {}", model.input_width()),
                format!("encoded features {}", encoder.feature_width()),
            ));
        }
        Ok(TrainedClassifier { model, encoder, epochs_run: 0, best_val_accuracy: None })
    }

    /// Epochs actually executed; early stopping can leave this under budget.
    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.best_val_accuracy
    }

    /// Predicted positive probabilities for every row of `table`.
    pub fn score(&self, table: &DatasetTable) -> Result<Vec<f64>> {
        bias::score_rows(&self.model, &self.encoder, table)
    }

    /// Thresholded accuracy over the whole table.
    pub fn accuracy(&self, table: &DatasetTable) -> Result<GroupAccuracy> {
        if table.n_rows() == 0 {
            return Err(Error::Usage("cannot evaluate on an empty table".into()));
        }
        let scores = self.score(table)?;
        let labels = self.encoder.labels(table)?;
        Ok(accuracy_with_ci(&scores, &labels))
    }
}

/// Deterministic stratified holdout: per label class, the tail of a shuffled
/// index list becomes validation. Returns (train, val) index sets.
fn holdout_indices(
    table: &DatasetTable,
    val_fraction: f64,
    rng: &mut SeededRng,
) -> (Vec<usize>, Vec<usize>) {
    let label_col = table.schema().label_index();
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, row) in table.rows().iter().enumerate() {
        strata[row.cells[label_col].as_categorical().expect("label is categorical")].push(i);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for stratum in &mut strata {
        rng.shuffle(stratum);
        let n_val = (stratum.len() as f64 * val_fraction).round() as usize;
        // Never hand the whole stratum to validation.
        let n_val = n_val.min(stratum.len().saturating_sub(1));
        let cut = stratum.len() - n_val;
        train.extend_from_slice(&stratum[..cut]);
        val.extend_from_slice(&stratum[cut..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn gather_rows(source: &Matrix, picks: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(picks.len(), source.cols());
    for (r, &i) in picks.iter().enumerate() {
        out.row_mut(r).copy_from_slice(source.row(i));
    }
    out
}

fn accuracy_plain(scores: &[f64], labels: &[f64]) -> f64 {
    let correct =
        scores.iter().zip(labels).filter(|(s, l)| (**s > 0.5) == (**l > 0.5)).count();
    correct as f64 / scores.len() as f64
}

/// Trains a 3-hidden-layer sigmoid MLP on `train_table` by minibatch binary
/// cross-entropy with SGD momentum. Fits the encoder on the same table.
pub fn train_classifier(
    train_table: &DatasetTable,
    config: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    config.validate()?;
    if train_table.n_rows() == 0 {
        return Err(Error::Usage("cannot train on an empty table".into()));
    }
    let encoder = Encoder::fit(train_table)?;
    let mut rng = SeededRng::new(config.seed);
    let mut model = MlpModel::three_hidden(
        encoder.feature_width(),
        config.hidden_units,
        1,
        OutputHead::Sigmoid,
        &mut rng,
    )?;
    if config.epochs == 0 {
        return Ok(TrainedClassifier { model, encoder, epochs_run: 0, best_val_accuracy: None });
    }

    let features = encoder.encode_features(train_table)?;
    let labels = encoder.labels(train_table)?;
    let (fit_idx, val_idx) = if config.val_fraction > 0.0 {
        holdout_indices(train_table, config.val_fraction, &mut rng)
    } else {
        ((0..train_table.n_rows()).collect(), Vec::new())
    };
    let val_features = gather_rows(&features, &val_idx);
    let val_labels: Vec<f64> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut opt = OptimizerState::sgd(config.lr, config.momentum)?;
    let mut order = fit_idx.clone();
    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale = 0usize;
    let mut epochs_run = 0usize;
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let batch = gather_rows(&features, chunk);
            let targets: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let fwd = model.forward(&batch)?;
            let preds: Vec<f64> = (0..chunk.len()).map(|r| fwd.output().get(r, 0)).collect();
            let (_, grad) = bce_loss(&preds, &targets)?;
            let mut upstream = Matrix::zeros(chunk.len(), 1);
            for (r, g) in grad.iter().enumerate() {
                upstream.set(r, 0, *g);
            }
            let grads = model.backward(&fwd, &upstream)?;
            optimizer_step(&mut opt, &mut model, &grads, false)?;
        }
        if model.has_non_finite() {
            return Err(Error::Diverged { epoch });
        }
        epochs_run = epoch + 1;
        if !val_idx.is_empty() {
            let fwd = model.forward(&val_features)?;
            let preds: Vec<f64> = (0..val_idx.len()).map(|r| fwd.output().get(r, 0)).collect();
            let acc = accuracy_plain(&preds, &val_labels);
            let improved = best.as_ref().is_none_or(|(b, _)| acc > *b);
            if improved {
                best = Some((acc, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    let (best_val_accuracy, model) = match best {
        Some((acc, m)) => (Some(acc), m),
        None => (None, model),
    };
    Ok(TrainedClassifier { model, encoder, epochs_run, best_val_accuracy })
}

pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

/// Self-contained on-disk form of a trained classifier: schema, fitted
/// numeric bounds, and the model, so scoring needs only this file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub format_version: u32,
    pub schema: Schema,
    pub schema_digest: String,
    /// Per-column numeric ranges the encoder was fitted with.
    pub numeric_bounds: Vec<Option<NumericBounds>>,
    pub epochs_run: usize,
    pub best_val_accuracy: Option<f64>,
    pub seed: u64,
    pub model: ModelCheckpoint,
}

impl ClassifierCheckpoint {
    pub fn from_classifier(clf: &TrainedClassifier, seed: u64) -> ClassifierCheckpoint {
        ClassifierCheckpoint {
            format_version: CLASSIFIER_FORMAT_VERSION,
            schema: clf.encoder.schema().clone(),
            schema_digest: clf.encoder.schema().digest(),
            numeric_bounds: clf.encoder.bounds().to_vec(),
            epochs_run: clf.epochs_run,
            best_val_accuracy: clf.best_val_accuracy,
            seed,
            model: ModelCheckpoint::from_model(&clf.model, seed),
        }
    }

    pub fn into_classifier(self) -> Result<TrainedClassifier> {
        if self.format_version != CLASSIFIER_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                expected: CLASSIFIER_FORMAT_VERSION,
            });
        }
        let encoder = Encoder::from_parts(self.schema, self.numeric_bounds)?;
        let mut clf = TrainedClassifier::from_parts(self.model.into_model()?, encoder)?;
        clf.epochs_run = self.epochs_run;
        clf.best_val_accuracy = self.best_val_accuracy;
        Ok(clf)
    }
}

pub fn save_classifier(path: &Path, clf: &TrainedClassifier, seed: u64) -> Result<()> {
    crate::artifact::write_json(path, &ClassifierCheckpoint::from_classifier(clf, seed))
}

pub fn load_classifier(path: &Path) -> Result<TrainedClassifier> {
    let bytes = std::fs::read(path)?;
    let ckpt: ClassifierCheckpoint = serde_json::from_slice(&bytes)?;
    ckpt.into_classifier()
}

/// Sample mean with a 95% half-width from the normal approximation,
/// 1.96 * s / sqrt(n), where s uses the n-1 denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_half_width: f64,
    pub samples: usize,
}

pub fn mean_ci(values: &[f64]) -> Result<MeanCi> {
    if values.len() < 2 {
        return Err(Error::param("values", "confidence interval needs at least 2 samples"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanCi { mean, ci_half_width: 1.96 * var.sqrt() / n.sqrt(), samples: values.len() })
}

/// Across-repeat accuracy of one population group on the test table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEval {
    pub group: GroupPredicate,
    pub rows: usize,
    pub accuracy: MeanCi,
}

/// Repeated-training evaluation: overall and per-group test accuracy as
/// mean +/- 95% half-width across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub hidden_units: usize,
    pub repeats: usize,
    pub base_seed: u64,
    pub overall: MeanCi,
    pub groups: Vec<GroupEval>,
    /// Raw per-repeat overall accuracies, in seed order.
    pub per_repeat: Vec<f64>,
}

/// Trains `repeats` classifiers with seeds `seed .. seed+repeats-1` and
/// aggregates their test accuracy.
pub fn evaluate_ci(
    train_table: &DatasetTable,
    test_table: &DatasetTable,
    config: &ClassifierConfig,
    repeats: usize,
) -> Result<EvalResult> {
    if repeats < 2 {
        return Err(Error::param("repeats", "confidence interval needs at least 2 repeats"));
    }
    if test_table.n_rows() == 0 {
        return Err(Error::Usage("cannot evaluate on an empty table".into()));
    }
    let mut per_repeat = Vec::with_capacity(repeats);
    // group key -> (rows, per-repeat accuracies), insertion-ordered.
    let mut group_order: Vec<GroupPredicate> = Vec::new();
    let mut group_rows: Vec<usize> = Vec::new();
    let mut group_acc: Vec<Vec<f64>> = Vec::new();
    for r in 0..repeats {
        let run_config =
            ClassifierConfig { seed: config.seed + r as u64, ..config.clone() };
        let clf = train_classifier(train_table, &run_config)
            .map_err(|e| Error::Usage(format!("repeat {r}: {e}")))?;
        per_repeat.push(clf.accuracy(test_table)?.accuracy);
        // Flags are irrelevant here; threshold 1 silences them.
        let report = bias::analyze(clf.model(), clf.encoder(), test_table, 1.0)?;
        for g in &report.groups {
            match group_order.iter().position(|p| *p == g.group) {
                Some(i) => group_acc[i].push(g.accuracy.accuracy),
                None => {
                    group_order.push(g.group.clone());
                    group_rows.push(g.rows);
                    group_acc.push(vec![g.accuracy.accuracy]);
                }
            }
        }
    }
    let mut groups = Vec::with_capacity(group_order.len());
    for ((group, rows), accs) in group_order.into_iter().zip(group_rows).zip(group_acc) {
        groups.push(GroupEval { group, rows, accuracy: mean_ci(&accs)? });
    }
    Ok(EvalResult {
        hidden_units: config.hidden_units,
        repeats,
        base_seed: config.seed,
        overall: mean_ci(&per_repeat)?,
        groups,
        per_repeat,
    })
}

/// One [`evaluate_ci`] per hidden-unit count, e.g. the 300/500/700/900 sweep.
pub fn evaluate_sweep(
    train_table: &DatasetTable,
    test_table: &DatasetTable,
    config: &ClassifierConfig,
    hidden_units: &[usize],
    repeats: usize,
) -> Result<Vec<EvalResult>> {
    hidden_units
        .iter()
        .map(|&h| {
            let cfg = ClassifierConfig { hidden_units: h, ..config.clone() };
            evaluate_ci(train_table, test_table, &cfg, repeats)
        })
        .collect()
}
