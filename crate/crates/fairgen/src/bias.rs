//! Per-group prediction analysis: probability histograms, accuracies with
//! confidence intervals, and flags for population groups a classifier treats
//! worse than its peers.
//!
//! A group is one value of one sensitive column (`sex=female`), or a
//! conjunction supplied by the caller. [`analyze`] enumerates every value of
//! every sensitive column present in the data and, within each column, flags
//! groups whose mean predicted positive probability or accuracy trails the
//! best group by more than a gap threshold. The threshold rule is a
//! scriptable stand-in for eyeballing the distributions; reports always carry
//! the raw histograms so a human can overrule the flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::atomic_write;
use crate::dataset::{format_numeric, DatasetTable, Encoder, GroupPredicate};
use crate::error::{Error, Result};
use crate::nn::{MlpModel, OutputHead};

/// Histogram bin count used throughout the reports.
pub const HISTOGRAM_BINS: usize = 10;

/// Default flagging threshold on the mean-probability and accuracy gaps.
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.1;

/// Distribution of predicted positive-class probabilities over one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupHistogram {
    pub group: GroupPredicate,
    /// 11 edges partitioning [0, 1] into 10 uniform bins.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Counts divided by the group size; sums to 1.
    pub normalized: Vec<f64>,
}

impl GroupHistogram {
    fn from_scores(group: GroupPredicate, scores: &[f64]) -> GroupHistogram {
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for &s in scores {
            counts[bin_of(s)] += 1;
        }
        let total = scores.len() as f64;
        let normalized = counts.iter().map(|&c| c as f64 / total).collect();
        let bin_edges = (0..=HISTOGRAM_BINS).map(|i| i as f64 / HISTOGRAM_BINS as f64).collect();
        GroupHistogram { group, bin_edges, counts, normalized }
    }

    /// Writes `bin_lo,bin_hi,count,normalized` rows.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["bin_lo", "bin_hi", "count", "normalized"])?;
        for i in 0..self.counts.len() {
            writer.write_record([
                format_numeric(self.bin_edges[i]),
                format_numeric(self.bin_edges[i + 1]),
                self.counts[i].to_string(),
                format_numeric(self.normalized[i]),
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::param("csv", e.to_string()))?;
        atomic_write(path, &bytes)
    }
}

/// Bin index for a probability; the top edge folds into the last bin.
fn bin_of(score: f64) -> usize {
    let clamped = score.clamp(0.0, 1.0);
    ((clamped * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// Accuracy of one group with a binomial 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// 1.96 * sqrt(acc * (1 - acc) / n), the normal approximation.
    pub ci_half_width: f64,
}

/// Thresholded accuracy of `scores` against 0/1 `labels`, with its binomial
/// interval. Panics on empty or mismatched slices; callers gate on size.
pub fn accuracy_with_ci(scores: &[f64], labels: &[f64]) -> GroupAccuracy {
    assert!(!scores.is_empty() && scores.len() == labels.len());
    accuracy_of(scores, labels)
}

fn accuracy_of(scores: &[f64], labels: &[f64]) -> GroupAccuracy {
    let total = scores.len();
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| (**s > 0.5) == (**l > 0.5))
        .count();
    let accuracy = correct as f64 / total as f64;
    let ci_half_width = 1.96 * (accuracy * (1.0 - accuracy) / total as f64).sqrt();
    GroupAccuracy { accuracy, correct, total, ci_half_width }
}

/// Everything measured about one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: GroupPredicate,
    pub rows: usize,
    pub mean_predicted_positive: f64,
    pub accuracy: GroupAccuracy,
    pub histogram: GroupHistogram,
}

/// Which statistic put a group behind its attribute's best group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagMetric {
    MeanPredictedPositive,
    Accuracy,
}

/// One disadvantaged-group finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpgFlag {
    pub group: GroupPredicate,
    /// Sensitive column the comparison ran within.
    pub attribute: String,
    pub metric: FlagMetric,
    pub value: f64,
    pub best_group: GroupPredicate,
    pub best_value: f64,
    /// best_value - value; flagged because it exceeds the threshold.
    pub gap: f64,
}

/// Whole-table statistics for context next to the per-group blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallStats {
    pub rows: usize,
    pub mean_predicted_positive: f64,
    pub accuracy: GroupAccuracy,
}

/// Output of [`analyze`]: histograms and accuracies for every group of every
/// sensitive column, plus the flags the gap rule raises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub gap_threshold: f64,
    pub overall: OverallStats,
    pub groups: Vec<GroupReport>,
    pub flags: Vec<TpgFlag>,
    pub warnings: Vec<String>,
}

impl BiasReport {
    /// Groups carrying at least one flag, each named once, report order.
    pub fn flagged_groups(&self) -> Vec<&GroupPredicate> {
        let mut seen: Vec<&GroupPredicate> = Vec::new();
        for flag in &self.flags {
            if !seen.contains(&&flag.group) {
                seen.push(&flag.group);
            }
        }
        seen
    }
}

/// Predicted positive-class probability for every row, in row order.
pub fn score_rows(model: &MlpModel, encoder: &Encoder, table: &DatasetTable) -> Result<Vec<f64>> {
    if !matches!(model.output_head(), OutputHead::Sigmoid) {
        return Err(Error::Usage(format!(
            "bias analysis needs a sigmoid classifier, got {:?} head",
            model.output_head()
        )));
    }
    let features = encoder.encode_features(table)?;
    if features.cols() != model.input_width() {
        return Err(Error::shape(
            "score_rows",
            format!("encoded features {}", features.cols()),
            format!("model input {}", model.input_width()),
        ));
    }
    let fwd = model.forward(&features)?;
    Ok((0..table.n_rows()).map(|r| fwd.output().get(r, 0)).collect())
}

fn non_empty_group_indices(table: &DatasetTable, group: &GroupPredicate) -> Result<Vec<usize>> {
    let indices = table.filter(group)?;
    if indices.is_empty() {
        return Err(Error::InsufficientRows {
            predicate: group.to_string(),
            needed: 1,
            available: 0,
        });
    }
    Ok(indices)
}

/// Histogram of predicted positive probabilities over one group's rows.
pub fn prediction_distribution(
    model: &MlpModel,
    encoder: &Encoder,
    table: &DatasetTable,
    group: &GroupPredicate,
) -> Result<GroupHistogram> {
    let indices = non_empty_group_indices(table, group)?;
    let scores = score_rows(model, encoder, &table.subset(&indices))?;
    Ok(GroupHistogram::from_scores(group.clone(), &scores))
}

/// Fraction of one group's rows where the thresholded prediction matches the
/// label, with its binomial interval.
pub fn group_accuracy(
    model: &MlpModel,
    encoder: &Encoder,
    table: &DatasetTable,
    group: &GroupPredicate,
) -> Result<GroupAccuracy> {
    let indices = non_empty_group_indices(table, group)?;
    let subset = table.subset(&indices);
    let scores = score_rows(model, encoder, &subset)?;
    let labels = encoder.labels(&subset)?;
    Ok(accuracy_of(&scores, &labels))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs the full per-group audit and applies the gap rule.
pub fn analyze(
    model: &MlpModel,
    encoder: &Encoder,
    table: &DatasetTable,
    gap_threshold: f64,
) -> Result<BiasReport> {
    if !gap_threshold.is_finite() || gap_threshold < 0.0 {
        return Err(Error::param(
            "gap_threshold",
            format!("must be a non-negative real, got {gap_threshold}"),
        ));
    }
    if table.n_rows() == 0 {
        return Err(Error::Usage("cannot analyze an empty table".into()));
    }
    let schema = table.schema().clone();
    let scores = score_rows(model, encoder, table)?;
    let labels = encoder.labels(table)?;

    let overall = OverallStats {
        rows: table.n_rows(),
        mean_predicted_positive: mean(&scores),
        accuracy: accuracy_of(&scores, &labels),
    };

    let mut groups: Vec<GroupReport> = Vec::new();
    let mut flags = Vec::new();
    let mut warnings = Vec::new();
    for &col in schema.sensitive_indices().iter() {
        let spec = &schema.columns()[col];
        let values = match &spec.kind {
            crate::dataset::ColumnKind::Categorical(v) => v.clone(),
            crate::dataset::ColumnKind::Numeric => continue,
        };
        // Gather per-value statistics for the values present in the data.
        let mut present: Vec<GroupReport> = Vec::new();
        for value in &values {
            let group = GroupPredicate::single(&spec.name, value);
            let indices = table.filter(&group)?;
            if indices.is_empty() {
                warnings.push(format!(
                    "group {group} has no rows in this table; skipped"
                ));
                continue;
            }
            let group_scores: Vec<f64> = indices.iter().map(|&i| scores[i]).collect();
            let group_labels: Vec<f64> = indices.iter().map(|&i| labels[i]).collect();
            present.push(GroupReport {
                rows: indices.len(),
                mean_predicted_positive: mean(&group_scores),
                accuracy: accuracy_of(&group_scores, &group_labels),
                histogram: GroupHistogram::from_scores(group.clone(), &group_scores),
                group,
            });
        }
        if present.len() < 2 {
            warnings.push(format!(
                "sensitive column {} has {} populated group(s); need 2 to compare, flagging skipped",
                spec.name,
                present.len()
            ));
            groups.extend(present);
            continue;
        }
        // The best group per metric is the comparison anchor; earlier value
        // order wins ties so reports are deterministic.
        let best_mean = present
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.mean_predicted_positive
                    .partial_cmp(&b.mean_predicted_positive)
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap();
        let best_acc = present
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.accuracy.accuracy.partial_cmp(&b.accuracy.accuracy).unwrap().then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap();
        for report in &present {
            let mean_gap = present[best_mean].mean_predicted_positive - report.mean_predicted_positive;
            if mean_gap > gap_threshold {
                flags.push(TpgFlag {
                    group: report.group.clone(),
                    attribute: spec.name.clone(),
                    metric: FlagMetric::MeanPredictedPositive,
                    value: report.mean_predicted_positive,
                    best_group: present[best_mean].group.clone(),
                    best_value: present[best_mean].mean_predicted_positive,
                    gap: mean_gap,
                });
            }
            let acc_gap = present[best_acc].accuracy.accuracy - report.accuracy.accuracy;
            if acc_gap > gap_threshold {
                flags.push(TpgFlag {
                    group: report.group.clone(),
                    attribute: spec.name.clone(),
                    metric: FlagMetric::Accuracy,
                    value: report.accuracy.accuracy,
                    best_group: present[best_acc].group.clone(),
                    best_value: present[best_acc].accuracy.accuracy,
                    gap: acc_gap,
                });
            }
        }
        groups.extend(present);
    }
    Ok(BiasReport { gap_threshold, overall, groups, flags, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Cell, ColumnSpec, Provenance, Row, Schema};
    use crate::numerics::SeededRng;

    fn schema_one_feature() -> Schema {
        Schema::new(vec![
            ColumnSpec::numeric("x"),
            ColumnSpec::categorical("sex", &["a", "b"]).sensitive(),
            ColumnSpec::categorical("outcome", &["neg", "pos"]).label(),
        ])
        .unwrap()
    }

    fn table_from(values: &[(f64, usize, usize)]) -> DatasetTable {
        let mut table = DatasetTable::new(schema_one_feature());
        for &(x, sex, label) in values {
            table
                .push_row(Row {
                    cells: vec![Cell::numeric(x), Cell::categorical(sex), Cell::categorical(label)],
                    provenance: Provenance::Original,
                })
                .unwrap();
        }
        table
    }

    /// Classifier computing sigmoid(scale * x_encoded + shift): the first
    /// feature threads through unit 0 of each hidden layer, the output layer
    /// applies the affine map. Encoded features are nonnegative, so ReLU
    /// passes them through unchanged.
    fn affine_model(width: usize, scale: f64, shift: f64) -> MlpModel {
        let mut rng = SeededRng::new(1);
        let mut model = MlpModel::three_hidden(width, 3, 1, OutputHead::Sigmoid, &mut rng).unwrap();
        let (weights, biases) = model.params_mut();
        for w in weights.iter_mut() {
            w.data_mut().fill(0.0);
        }
        for b in biases.iter_mut() {
            b.fill(0.0);
        }
        for w in weights.iter_mut().take(3) {
            w.set(0, 0, 1.0);
        }
        weights[3].set(0, 0, scale);
        biases[3][0] = shift;
        model
    }

    fn constant_half_model(width: usize) -> MlpModel {
        affine_model(width, 0.0, 0.0)
    }

    #[test]
    fn constant_classifier_masses_one_bin() {
        let table = table_from(&[(0.0, 0, 0), (5.0, 0, 1), (10.0, 1, 0), (2.5, 1, 1)]);
        let encoder = Encoder::fit(&table).unwrap();
        let model = constant_half_model(encoder.feature_width());
        let hist =
            prediction_distribution(&model, &encoder, &table, &"sex=a".parse().unwrap()).unwrap();
        assert_eq!(hist.counts.iter().sum::<usize>(), 2);
        assert_eq!(hist.counts[5], 2, "all mass in the bin holding 0.5: {:?}", hist.counts);
        assert!((hist.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_matches_hand_tally_through_the_full_pipeline() {
        // x ranges over [0, 10], encoded to x/10; the model scores
        // sigmoid(1.2 x - 6). Expected bins tallied by hand from the
        // closed form.
        let xs = [
            0.0, 1.0, 2.0, 3.0, 4.0, 4.5, 5.0, 5.5, 6.0, 7.0, 8.0, 9.0, 10.0, 4.2, 5.2, 3.5, 6.5,
            2.5, 7.5, 4.8,
        ];
        let rows: Vec<(f64, usize, usize)> = xs.iter().map(|&x| (x, 0, 0)).collect();
        let table = table_from(&rows);
        let encoder = Encoder::fit(&table).unwrap();
        let model = affine_model(encoder.feature_width(), 12.0, -6.0);
        let hist =
            prediction_distribution(&model, &encoder, &table, &"sex=a".parse().unwrap()).unwrap();
        assert_eq!(hist.counts, vec![5, 1, 2, 1, 1, 2, 1, 1, 1, 5]);

        // Independent oracle: rebuild each score from raw data and bin it.
        let mut expect = vec![0usize; 10];
        for &x in &xs {
            let score = 1.0 / (1.0 + (-(1.2 * x - 6.0)).exp());
            expect[((score * 10.0) as usize).min(9)] += 1;
        }
        assert_eq!(hist.counts, expect);
    }

    #[test]
    fn empty_group_is_an_error_naming_the_predicate() {
        let table = table_from(&[(1.0, 0, 0), (2.0, 0, 1)]);
        let encoder = Encoder::fit(&table).unwrap();
        let model = constant_half_model(encoder.feature_width());
        let err = prediction_distribution(&model, &encoder, &table, &"sex=b".parse().unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("sex=b"), "{err}");
    }

    #[test]
    fn oracle_and_inverted_classifiers_bound_accuracy() {
        // Label rule: positive iff x > 5; no x equals 5 exactly.
        let rows: Vec<(f64, usize, usize)> = [1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0, 10.0, 0.0]
            .iter()
            .map(|&x| (x, 0, usize::from(x > 5.0)))
            .collect();
        let table = table_from(&rows);
        let encoder = Encoder::fit(&table).unwrap();
        let group = "sex=a".parse().unwrap();

        let oracle = affine_model(encoder.feature_width(), 12.0, -6.0);
        let acc = group_accuracy(&oracle, &encoder, &table, &group).unwrap();
        assert_eq!(acc.accuracy, 1.0);
        assert_eq!((acc.correct, acc.total), (10, 10));
        assert_eq!(acc.ci_half_width, 0.0);

        let inverted = affine_model(encoder.feature_width(), -12.0, 6.0);
        let acc = group_accuracy(&inverted, &encoder, &table, &group).unwrap();
        assert_eq!(acc.accuracy, 0.0);
    }

    #[test]
    fn seven_of_ten_right_scores_point_seven() {
        // Three rows carry deliberately wrong labels.
        let mut rows: Vec<(f64, usize, usize)> = [1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0]
            .iter()
            .map(|&x| (x, 0, usize::from(x > 5.0)))
            .collect();
        rows.push((9.0, 0, 0));
        rows.push((10.0, 0, 0));
        rows.push((0.5, 0, 1));
        let table = table_from(&rows);
        let encoder = Encoder::fit(&table).unwrap();
        let model = affine_model(encoder.feature_width(), 12.0, -6.0);
        let acc = group_accuracy(&model, &encoder, &table, &"sex=a".parse().unwrap()).unwrap();
        assert!((acc.accuracy - 0.7).abs() < 1e-12);
        let expect_ci = 1.96 * (0.7_f64 * 0.3 / 10.0).sqrt();
        assert!((acc.ci_half_width - expect_ci).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_raise_no_flags() {
        let rows: Vec<(f64, usize, usize)> = (0..20)
            .map(|i| (i as f64 / 2.0, i % 2, usize::from(i as f64 / 2.0 > 5.0)))
            .collect();
        let table = table_from(&rows);
        let encoder = Encoder::fit(&table).unwrap();
        let model = affine_model(encoder.feature_width(), 12.0, -6.0);
        let report = analyze(&model, &encoder, &table, 0.1).unwrap();
        // Alternating assignment gives both groups the same x values.
        assert!(report.flags.is_empty(), "{:?}", report.flags);
        assert_eq!(report.groups.len(), 2);
        assert_eq!(report.overall.rows, 20);
    }

    #[test]
    fn constructed_gap_flags_disadvantaged_group() {
        // Group a sits at x=6.2 (score ~0.59), group b at x=3.8 (score
        // ~0.19): a 0.4 mean gap, and b is always mispredicted.
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.push((6.2, 0, 1));
            rows.push((3.8, 1, 1));
        }
        // Anchor the encoder to [0, 10] so scores match the closed form.
        rows.push((0.0, 0, 0));
        rows.push((10.0, 0, 1));
        let table = table_from(&rows);
        let encoder = Encoder::fit(&table).unwrap();
        let model = affine_model(encoder.feature_width(), 12.0, -6.0);
        let report = analyze(&model, &encoder, &table, 0.1).unwrap();

        let mean_flag = report
            .flags
            .iter()
            .find(|f| f.metric == FlagMetric::MeanPredictedPositive)
            .expect("mean gap flag");
        assert_eq!(mean_flag.group.to_string(), "sex=b");
        assert_eq!(mean_flag.best_group.to_string(), "sex=a");
        assert!(mean_flag.gap > 0.3, "gap {}", mean_flag.gap);
        let acc_flag = report
            .flags
            .iter()
            .find(|f| f.metric == FlagMetric::Accuracy)
            .expect("accuracy gap flag");
        assert_eq!(acc_flag.group.to_string(), "sex=b");
        assert_eq!(report.flagged_groups().len(), 1);

        // An impossible threshold silences every flag.
        let quiet = analyze(&model, &encoder, &table, 1.0).unwrap();
        assert!(quiet.flags.is_empty());
    }

    #[test]
    fn single_populated_group_skips_flagging_with_warning() {
        let table = table_from(&[(1.0, 0, 0), (2.0, 0, 1), (3.0, 0, 0)]);
        let encoder = Encoder::fit(&table).unwrap();
        let model = constant_half_model(encoder.feature_width());
        let report = analyze(&model, &encoder, &table, 0.1).unwrap();
        assert!(report.flags.is_empty());
        assert!(
            report.warnings.iter().any(|w| w.contains("sex") && w.contains("flagging skipped")),
            "{:?}",
            report.warnings
        );
    }

    #[test]
    fn flags_ignore_row_order() {
        let mut rows = Vec::new();
        for i in 0..30 {
            let (x, sex) = if i % 3 == 0 { (3.8, 1) } else { (6.2, 0) };
            rows.push((x, sex, 1));
        }
        rows.push((0.0, 0, 0));
        rows.push((10.0, 0, 1));
        let table = table_from(&rows);
        let encoder = Encoder::fit(&table).unwrap();
        let model = affine_model(encoder.feature_width(), 12.0, -6.0);
        let base = analyze(&model, &encoder, &table, 0.1).unwrap();

        let mut reversed_rows = rows.clone();
        reversed_rows.reverse();
        let reversed = table_from(&reversed_rows);
        let report = analyze(&model, &encoder, &reversed, 0.1).unwrap();
        assert_eq!(base.flags, report.flags);
    }

    #[test]
    fn non_sigmoid_head_is_rejected() {
        let table = table_from(&[(1.0, 0, 0), (2.0, 1, 1)]);
        let encoder = Encoder::fit(&table).unwrap();
        let mut rng = SeededRng::new(5);
        let model = MlpModel::three_hidden(
            encoder.feature_width(),
            3,
            2,
            OutputHead::Softmax,
            &mut rng,
        )
        .unwrap();
        assert!(score_rows(&model, &encoder, &table).is_err());
    }

    #[test]
    fn histogram_csv_has_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let table = table_from(&[(0.0, 0, 0), (5.0, 0, 1), (10.0, 0, 1)]);
        let encoder = Encoder::fit(&table).unwrap();
        let model = affine_model(encoder.feature_width(), 12.0, -6.0);
        let hist =
            prediction_distribution(&model, &encoder, &table, &"sex=a".parse().unwrap()).unwrap();
        let path = dir.path().join("hist.csv");
        hist.save_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "bin_lo,bin_hi,count,normalized");
        assert_eq!(lines.count(), 10);
        assert!(text.contains("0.9,1,"), "{text}");
    }

    #[test]
    fn top_edge_falls_in_last_bin() {
        assert_eq!(bin_of(1.0), 9);
        assert_eq!(bin_of(0.0), 0);
        assert_eq!(bin_of(0.999999), 9);
        assert_eq!(bin_of(0.1), 1);
    }
}
