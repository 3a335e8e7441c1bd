//! Confusion-matrix accounting and precision / recall / F-score.
//!
//! Multi-class scores use a one-vs-rest reduction per class:
//! `TP = counts[c][c]`, `FP = column sum - TP`, `FN = row sum - TP`, and
//!
//! * precision `TP / (TP + FP)`
//! * recall `TP / (TP + FN)`
//! * F-score `2TP / (2TP + FP + FN)`
//!
//! A zero denominator yields 0 with the matching `*_undefined` flag set.
//! Macro scores are unweighted means over the three classes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::label::SentimentLabel;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("label lists differ in length: {truth} true vs {predicted} predicted")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
}

/// Rows are true labels, columns are predicted labels, both indexed by
/// label code.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn column_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion(truth: &[SentimentLabel], predicted: &[SentimentLabel]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        cm.counts[t.code()][p.code()] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: SentimentLabel,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f_score_undefined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: [ClassMetrics; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
    pub accuracy: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let per_class = SentimentLabel::ALL.map(|label| {
        let c = label.code();
        let tp = cm.counts[c][c];
        let fp = cm.column_sum(c) - tp;
        let fn_ = cm.row_sum(c) - tp;
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (f_score, f_score_undefined) = ratio(2 * tp, 2 * tp + fp + fn_);
        ClassMetrics {
            label,
            precision,
            recall,
            f_score,
            support: tp + fn_,
            precision_undefined,
            recall_undefined,
            f_score_undefined,
        }
    });
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
    let correct: u64 = (0..3).map(|c| cm.counts[c][c]).sum();
    Ok(MetricsReport {
        per_class,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f_score: mean(|m| m.f_score),
        accuracy: correct as f64 / total as f64,
        total,
        confusion: *cm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Side-by-side macro scores sorted by macro F, descending. Equal scores
/// keep their input order.
pub fn compare(reports: &[(String, MetricsReport)]) -> Result<ComparisonTable, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewReports(reports.len()));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(name, r)| ComparisonRow {
            model: name.clone(),
            macro_precision: r.macro_precision,
            macro_recall: r.macro_recall,
            macro_f_score: r.macro_f_score,
            accuracy: r.accuracy,
        })
        .collect();
    rows.sort_by(|a, b| b.macro_f_score.total_cmp(&a.macro_f_score));
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,macro_precision,macro_recall,macro_f_score,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.model, r.macro_precision, r.macro_recall, r.macro_f_score, r.accuracy
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            "model", "precision", "recall", "f-score", "accuracy"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}",
                r.model, r.macro_precision, r.macro_recall, r.macro_f_score, r.accuracy
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SentimentLabel::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [Negative, Neutral, Positive, Positive];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!(cm.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 2]]);
        let r = metrics(&cm).unwrap();
        for m in &r.per_class {
            assert_eq!((m.precision, m.recall, m.f_score), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn constant_prediction_fills_one_column() {
        let cm = confusion(&[Negative, Positive, Neutral], &[Negative; 3]).unwrap();
        assert_eq!(cm.column_sum(0), 3);
        assert_eq!(cm.column_sum(1) + cm.column_sum(2), 0);
    }

    #[test]
    fn worked_case() {
        let cm = ConfusionMatrix::from_counts([[8, 4, 0], [2, 0, 0], [0, 0, 0]]);
        let m = metrics(&cm).unwrap().per_class[0];
        assert_eq!(m.precision, 0.8);
        assert!((m.recall - 0.6667).abs() < 1e-4);
        assert!((m.f_score - 16.0 / 22.0).abs() < 1e-9);
    }

    #[test]
    fn undefined_metrics_are_flagged_zero() {
        let cm = ConfusionMatrix::from_counts([[3, 0, 0], [0, 2, 0], [0, 0, 0]]);
        let m = metrics(&cm).unwrap().per_class[2];
        assert_eq!((m.precision, m.recall, m.f_score, m.support), (0.0, 0.0, 0.0, 0));
        assert!(m.precision_undefined && m.recall_undefined && m.f_score_undefined);
    }

    #[test]
    fn errors() {
        assert_eq!(
            confusion(&[Negative], &[]),
            Err(EvalError::LengthMismatch { truth: 1, predicted: 0 })
        );
        assert_eq!(confusion(&[], &[]), Err(EvalError::Empty));
        assert_eq!(metrics(&ConfusionMatrix::default()), Err(EvalError::Empty));
    }

    fn report_with_f(f: f64) -> MetricsReport {
        let mut r = metrics(&ConfusionMatrix::from_counts([[1, 0, 0], [0, 1, 0], [0, 0, 1]])).unwrap();
        r.macro_f_score = f;
        r
    }

    #[test]
    fn comparison_ordering() {
        let t = compare(&[
            ("SVM".into(), report_with_f(0.70)),
            ("BERT".into(), report_with_f(0.84)),
            ("MNB".into(), report_with_f(0.83)),
        ])
        .unwrap();
        let names: Vec<_> = t.rows.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["BERT", "MNB", "SVM"]);
        assert!(t.to_csv().starts_with("model,macro_precision"));
        assert_eq!(t.to_text().lines().count(), 4);

        let tied = compare(&[("a".into(), report_with_f(0.5)), ("b".into(), report_with_f(0.5))]).unwrap();
        assert_eq!(tied.rows[0].model, "a");
        assert_eq!(compare(&[("a".into(), report_with_f(0.5))]), Err(EvalError::TooFewReports(1)));
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(usize, usize)>> {
        proptest::collection::vec((0usize..3, 0usize..3), 1..60)
    }

    proptest! {
        #[test]
        fn tally_matches_pair_counting(pairs in arb_pairs()) {
            let t: Vec<_> = pairs.iter().map(|p| SentimentLabel::ALL[p.0]).collect();
            let p: Vec<_> = pairs.iter().map(|p| SentimentLabel::ALL[p.1]).collect();
            let cm = confusion(&t, &p).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let expected = pairs.iter().filter(|&&(a, b)| a == i && b == j).count() as u64;
                    prop_assert_eq!(cm.counts[i][j], expected);
                }
            }
            prop_assert_eq!(cm.total(), pairs.len() as u64);
        }

        #[test]
        fn permuting_pairs_keeps_matrix(mut pairs in arb_pairs(), seed in any::<u64>()) {
            let build = |pairs: &[(usize, usize)]| {
                let t: Vec<_> = pairs.iter().map(|p| SentimentLabel::ALL[p.0]).collect();
                let p: Vec<_> = pairs.iter().map(|p| SentimentLabel::ALL[p.1]).collect();
                confusion(&t, &p).unwrap()
            };
            let before = build(&pairs);
            use rand::{seq::SliceRandom, SeedableRng};
            pairs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(build(&pairs), before);
        }

        #[test]
        fn f_is_harmonic_mean(counts in proptest::array::uniform3(proptest::array::uniform3(0u64..20))) {
            let cm = ConfusionMatrix::from_counts(counts);
            prop_assume!(cm.total() > 0);
            let r = metrics(&cm).unwrap();
            for m in &r.per_class {
                prop_assert!((0.0..=1.0).contains(&m.precision) && (0.0..=1.0).contains(&m.recall) && (0.0..=1.0).contains(&m.f_score));
                if m.precision > 0.0 && m.recall > 0.0 {
                    let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                    prop_assert!((h - m.f_score).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn self_agreement_scores_one(labels in proptest::collection::vec(0usize..3, 1..40)) {
            let y: Vec<_> = labels.iter().map(|&c| SentimentLabel::ALL[c]).collect();
            let r = metrics(&confusion(&y, &y).unwrap()).unwrap();
            for m in &r.per_class {
                if m.support > 0 {
                    prop_assert_eq!((m.precision, m.recall, m.f_score), (1.0, 1.0, 1.0));
                }
            }
        }
    }
}
