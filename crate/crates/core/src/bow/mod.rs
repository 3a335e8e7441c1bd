//! Bag-of-words baselines: a unigram vocabulary, count and tf-idf
//! features, Multinomial Naive Bayes and a one-vs-rest linear SVM.

mod mnb;
mod model_file;
mod svm;

pub use mnb::{mnb_predict, mnb_train, MnbModel};
pub use model_file::{read_model, write_model, BowModel, ModelFileError, MODEL_MAGIC, MODEL_VERSION};
pub use svm::{pegasos_binary, svm_predict, svm_train, BinarySvm, SvmConfig, SvmModel};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::label::SentimentLabel;
use crate::preprocess::Document;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BowError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("min_count must be at least 1")]
    BadMinCount,
    #[error("document {0:?} has no label")]
    Unlabeled(String),
    #[error("class {0} does not occur in the training data")]
    MissingClass(SentimentLabel),
    #[error("training data must contain at least two classes")]
    SingleClass,
    #[error("{name} must be positive and finite, got {value}")]
    BadHyperparameter { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Raw token counts.
    Tf,
    /// Counts times `ln((1 + N) / (1 + df)) + 1`, L2-normalized.
    #[default]
    Tfidf,
}

/// Dense token index over the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct BowVocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    document_frequency: Vec<u64>,
    num_documents: u64,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    counts: Vec<u64>,
    document_frequency: Vec<u64>,
    num_documents: u64,
}

impl From<VocabRepr> for BowVocab {
    fn from(r: VocabRepr) -> Self {
        let index = r.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        BowVocab {
            tokens: r.tokens,
            counts: r.counts,
            document_frequency: r.document_frequency,
            num_documents: r.num_documents,
            index,
        }
    }
}

impl From<BowVocab> for VocabRepr {
    fn from(v: BowVocab) -> Self {
        VocabRepr {
            tokens: v.tokens,
            counts: v.counts,
            document_frequency: v.document_frequency,
            num_documents: v.num_documents,
        }
    }
}

impl BowVocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn document_frequency(&self, index: usize) -> u64 {
        self.document_frequency[index]
    }

    pub fn num_documents(&self) -> u64 {
        self.num_documents
    }

    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.num_documents as f64) / (1.0 + self.document_frequency[index] as f64)).ln() + 1.0
    }
}

/// Builds the vocabulary from training documents only. Tokens with fewer
/// than `min_count` total occurrences are left out. Indices run by
/// descending count, ties broken lexicographically.
pub fn build_vocab(documents: &[Document], min_count: u64) -> Result<BowVocab, BowError> {
    if documents.is_empty() {
        return Err(BowError::EmptyTraining);
    }
    if min_count == 0 {
        return Err(BowError::BadMinCount);
    }
    let mut stats: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for doc in documents {
        let mut seen: Vec<&str> = Vec::with_capacity(doc.tokens.len());
        for tok in &doc.tokens {
            let entry = stats.entry(tok.as_str()).or_default();
            entry.0 += 1;
            if !seen.contains(&tok.as_str()) {
                seen.push(tok);
                entry.1 += 1;
            }
        }
    }
    let mut kept: Vec<(&str, u64, u64)> = stats
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_count)
        .map(|(t, (c, df))| (t, c, df))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(VocabRepr {
        tokens: kept.iter().map(|k| k.0.to_string()).collect(),
        counts: kept.iter().map(|k| k.1).collect(),
        document_frequency: kept.iter().map(|k| k.2).collect(),
        num_documents: documents.len() as u64,
    }
    .into())
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, v)| v == 0.0)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        SparseVector {
            entries: self.entries.iter().map(|&(i, v)| (i, v * k)).collect(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Out-of-vocabulary tokens are ignored.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &BowVocab, mode: FeatureMode) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in tokens {
        if let Some(i) = vocab.index_of(tok.as_ref()) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let mut v = SparseVector {
        entries: counts.into_iter().collect(),
    };
    if mode == FeatureMode::Tfidf {
        for e in &mut v.entries {
            e.1 *= vocab.idf(e.0);
        }
        let norm = v.norm();
        if norm > 0.0 {
            v = v.scaled(1.0 / norm);
        }
    }
    v
}

pub(crate) fn labels_of(documents: &[Document]) -> Result<Vec<SentimentLabel>, BowError> {
    documents
        .iter()
        .map(|d| d.label.ok_or_else(|| BowError::Unlabeled(d.id.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document::from_tokens(id, &text.split_whitespace().collect::<Vec<_>>())
    }

    #[test]
    fn vocab_counts_and_order() {
        let docs = [doc("1", "ppkm naik ppkm"), doc("2", "ppkm turun"), doc("3", "apa naik")];
        let v = build_vocab(&docs, 1).unwrap();
        assert_eq!(v.tokens(), ["ppkm", "naik", "apa", "turun"]);
        let i = v.index_of("ppkm").unwrap();
        assert_eq!((v.count(i), v.document_frequency(i)), (3, 2));
        assert_eq!(v.num_documents(), 3);
        let v2 = build_vocab(&docs, 2).unwrap();
        assert_eq!(v2.tokens(), ["ppkm", "naik"]);
        assert_eq!(build_vocab(&[], 1), Err(BowError::EmptyTraining));
        assert_eq!(build_vocab(&docs, 0), Err(BowError::BadMinCount));
    }

    // Independent recount over a fixed fixture.
    #[test]
    fn vocab_matches_recount() {
        let docs: Vec<Document> = (0..30)
            .map(|i| doc(&i.to_string(), &format!("w{} w{} w{} common", i % 3, i % 5, i % 7)))
            .collect();
        let v = build_vocab(&docs, 1).unwrap();
        assert_eq!(v, build_vocab(&docs, 1).unwrap());
        for (i, tok) in v.tokens().iter().enumerate() {
            let count = docs.iter().flat_map(|d| &d.tokens).filter(|t| *t == tok).count() as u64;
            let df = docs.iter().filter(|d| d.tokens.contains(tok)).count() as u64;
            assert_eq!((v.count(i), v.document_frequency(i)), (count, df), "{tok}");
            assert!(v.document_frequency(i) <= v.num_documents());
        }
        for w in v.tokens().windows(2) {
            let (a, b) = (v.index_of(&w[0]).unwrap(), v.index_of(&w[1]).unwrap());
            assert!(v.count(a) > v.count(b) || (v.count(a) == v.count(b) && w[0] < w[1]));
        }
    }

    #[test]
    fn tf_and_tfidf() {
        let docs = [doc("1", "ppkm ppkm naik"), doc("2", "ppkm turun"), doc("3", "naik")];
        let v = build_vocab(&docs, 1).unwrap();
        assert!(vectorize(&["zzz", "yyy"], &v, FeatureMode::Tf).is_zero());
        let tf = vectorize(&["ppkm", "ppkm"], &v, FeatureMode::Tf);
        assert_eq!(tf.get(v.index_of("ppkm").unwrap()), 2.0);

        // Hand substitution: N = 3, df(ppkm) = 2, df(turun) = 1.
        let idf_ppkm = (4.0f64 / 3.0).ln() + 1.0;
        let idf_turun = (4.0f64 / 2.0).ln() + 1.0;
        let raw = [2.0 * idf_ppkm, idf_turun];
        let norm = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
        let x = vectorize(&["ppkm", "turun", "ppkm", "oov"], &v, FeatureMode::Tfidf);
        assert!((x.get(v.index_of("ppkm").unwrap()) - raw[0] / norm).abs() < 1e-12);
        assert!((x.get(v.index_of("turun").unwrap()) - raw[1] / norm).abs() < 1e-12);
        assert!((x.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocab_serde_rebuilds_index() {
        let v = build_vocab(&[doc("1", "a b b")], 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: BowVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("b"), Some(0));
    }
}
