use serde::{Deserialize, Serialize};

use super::{labels_of, vectorize, BowError, BowVocab, FeatureMode};
use crate::label::SentimentLabel;
use crate::preprocess::Document;

/// Multinomial Naive Bayes over raw token counts with additive smoothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub class_log_prior: [f64; 3],
    /// `token_log_likelihood[c][t]`, one row per class.
    pub token_log_likelihood: Vec<Vec<f64>>,
    pub smoothing_alpha: f64,
}

/// `class_log_prior[c] = ln(n_c / N)` and
/// `token_log_likelihood[c][t] = ln((n_ct + alpha) / (n_c. + alpha * V))`,
/// counting only in-vocabulary tokens. Every class must occur.
pub fn mnb_train(train: &[Document], vocab: &BowVocab, alpha: f64) -> Result<MnbModel, BowError> {
    if train.is_empty() {
        return Err(BowError::EmptyTraining);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(BowError::BadHyperparameter { name: "alpha", value: alpha });
    }
    let labels = labels_of(train)?;
    let v = vocab.len();
    let mut doc_counts = [0u64; 3];
    let mut token_counts = vec![vec![0.0f64; v]; 3];
    for (doc, label) in train.iter().zip(&labels) {
        let c = label.code();
        doc_counts[c] += 1;
        for &(i, n) in &vectorize(&doc.tokens, vocab, FeatureMode::Tf).entries {
            token_counts[c][i] += n;
        }
    }
    if let Some(missing) = SentimentLabel::ALL.into_iter().find(|l| doc_counts[l.code()] == 0) {
        return Err(BowError::MissingClass(missing));
    }
    let n = train.len() as f64;
    let class_log_prior = doc_counts.map(|k| (k as f64 / n).ln());
    let token_log_likelihood = token_counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let denom = (total + alpha * v as f64).ln();
            row.iter().map(|&k| (k + alpha).ln() - denom).collect()
        })
        .collect();
    Ok(MnbModel {
        class_log_prior,
        token_log_likelihood,
        smoothing_alpha: alpha,
    })
}

/// Returns the argmax label (ties to the lowest code) and the per-class
/// joint log scores `ln P(c) + sum_t count(t) * ln P(t | c)`.
pub fn mnb_predict(document: &Document, model: &MnbModel, vocab: &BowVocab) -> (SentimentLabel, [f64; 3]) {
    let x = vectorize(&document.tokens, vocab, FeatureMode::Tf);
    let scores: [f64; 3] = std::array::from_fn(|c| model.class_log_prior[c] + x.dot(&model.token_log_likelihood[c]));
    (SentimentLabel::argmax(&scores), scores)
}
