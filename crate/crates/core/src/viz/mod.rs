//! Frequency tables behind the corpus charts, plus deterministic SVG output.

mod svg;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::label::SentimentLabel;
use crate::preprocess::Document;

pub use svg::{render_cloud_svg, render_distribution_svg, render_ngram_svg, render_svg, Chart};

#[derive(Debug, thiserror::Error)]
pub enum VizError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("document {0} has no label")]
    Unlabeled(String),
    #[error("nothing to draw")]
    EmptyChart,
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Grams ordered by count descending, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramTable {
    pub n: usize,
    pub entries: Vec<(Vec<String>, u64)>,
}

impl NgramTable {
    /// `gram,count` rows; gram tokens are joined with single spaces.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["gram", "count"]).expect("in-memory write");
        for (gram, count) in &self.entries {
            w.write_record([gram.join(" "), count.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

fn rank<K: Ord + Clone>(counts: HashMap<K, u64>, top_k: Option<usize>) -> Vec<(K, u64)> {
    let mut entries: Vec<(K, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        entries.truncate(k);
    }
    entries
}

/// Sliding-window n-grams inside each document; grams never cross
/// document boundaries. `top_k = None` keeps every gram.
pub fn ngrams(documents: &[Document], n: usize, top_k: Option<usize>) -> Result<NgramTable, VizError> {
    if n == 0 {
        return Err(VizError::ZeroOrder);
    }
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    for d in documents {
        for w in d.tokens.windows(n) {
            *counts.entry(w.to_vec()).or_default() += 1;
        }
    }
    Ok(NgramTable { n, entries: rank(counts, top_k) })
}

/// The `top_k` most frequent words, ranked like [`NgramTable`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CloudWeights {
    pub entries: Vec<(String, u64)>,
}

impl CloudWeights {
    pub fn get(&self, word: &str) -> Option<u64> {
        self.entries.iter().find(|(w, _)| w == word).map(|e| e.1)
    }

    /// JSON object from word to count, keys sorted.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, u64> = self.entries.iter().map(|(w, c)| (w.as_str(), *c)).collect();
        serde_json::to_string_pretty(&map).expect("string keys")
    }
}

pub fn cloud_weights(documents: &[Document], top_k: usize, extra_stopwords: &BTreeSet<String>) -> CloudWeights {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for t in documents.iter().flat_map(|d| &d.tokens) {
        if !extra_stopwords.contains(t) {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    CloudWeights { entries: rank(counts, Some(top_k)) }
}

/// Document counts per label, indexed by label code.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub negative: u64,
    pub neutral: u64,
    pub positive: u64,
}

impl Distribution {
    pub fn count(&self, label: SentimentLabel) -> u64 {
        match label {
            SentimentLabel::Negative => self.negative,
            SentimentLabel::Neutral => self.neutral,
            SentimentLabel::Positive => self.positive,
        }
    }

    pub fn total(&self) -> u64 {
        self.negative + self.neutral + self.positive
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,count\n");
        for l in SentimentLabel::ALL {
            out.push_str(&format!("{l},{}\n", self.count(l)));
        }
        out
    }
}

pub fn sentiment_distribution(documents: &[Document]) -> Result<Distribution, VizError> {
    let mut dist = Distribution::default();
    for d in documents {
        match d.label.ok_or_else(|| VizError::Unlabeled(d.id.clone()))? {
            SentimentLabel::Negative => dist.negative += 1,
            SentimentLabel::Neutral => dist.neutral += 1,
            SentimentLabel::Positive => dist.positive += 1,
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SentimentLabel::*;

    fn docs(token_lists: &[&[&str]]) -> Vec<Document> {
        token_lists.iter().enumerate().map(|(i, t)| Document::from_tokens(i.to_string(), t)).collect()
    }

    fn gram(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unigram_and_bigram_examples() {
        let d = docs(&[&["covid", "ppkm", "covid"]]);
        let uni = ngrams(&d, 1, None).unwrap();
        assert_eq!(uni.entries, vec![(gram(&["covid"]), 2), (gram(&["ppkm"]), 1)]);
        let bi = ngrams(&d, 2, None).unwrap();
        assert_eq!(bi.entries, vec![(gram(&["covid", "ppkm"]), 1), (gram(&["ppkm", "covid"]), 1)]);
        assert_eq!(bi.to_csv(), "gram,count\ncovid ppkm,1\nppkm covid,1\n");
        assert!(ngrams(&d, 4, None).unwrap().entries.is_empty());
        assert!(matches!(ngrams(&d, 0, None), Err(VizError::ZeroOrder)));
    }

    #[test]
    fn grams_stay_inside_documents() {
        let d = docs(&[&["a", "b"], &["c", "d"]]);
        let bi = ngrams(&d, 2, None).unwrap();
        assert!(!bi.entries.iter().any(|(g, _)| g == &gram(&["b", "c"])));
        assert_eq!(bi.entries.len(), 2);
    }

    #[test]
    fn dominant_words_head_the_tables() {
        let d = docs(&[&["covid", "ppkm", "enggak", "warga"], &["ppkm", "covid", "covid"], &["covid", "ppkm", "pasar"], &["enggak"]]);
        let uni = ngrams(&d, 1, Some(2)).unwrap();
        assert_eq!(uni.entries, vec![(gram(&["covid"]), 4), (gram(&["ppkm"]), 3)]);
        let cloud = cloud_weights(&d, 10, &BTreeSet::new());
        assert_eq!(cloud.entries[0], ("covid".to_string(), 4));
        assert_eq!(cloud_weights(&d, 1, &BTreeSet::new()).entries.len(), 1);
        let without = cloud_weights(&d, 10, &BTreeSet::from(["covid".to_string()]));
        assert_eq!(without.entries[0].0, "ppkm");
        assert_eq!(without.get("covid"), None);
        assert!(cloud_weights(&[], 5, &BTreeSet::new()).entries.is_empty());
        assert_eq!(cloud.to_json().lines().nth(1).unwrap().trim(), "\"covid\": 4,");
    }

    #[test]
    fn distribution_counts() {
        let mut corpus = Vec::new();
        for (label, n) in [(Negative, 3590), (Positive, 800), (Neutral, 925)] {
            corpus.extend((0..n).map(|i| Document::from_tokens(format!("{label}{i}"), &["x"]).with_label(label)));
        }
        let dist = sentiment_distribution(&corpus).unwrap();
        assert_eq!((dist.negative, dist.neutral, dist.positive), (3590, 925, 800));
        assert_eq!(dist.total(), 5315);
        assert_eq!(dist.to_csv(), "label,count\nnegative,3590\nneutral,925\npositive,800\n");
        let uniform: Vec<_> = SentimentLabel::ALL.iter().flat_map(|&l| (0..4).map(move |i| Document::from_tokens(format!("{l}{i}"), &["y"]).with_label(l))).collect();
        let u = sentiment_distribution(&uniform).unwrap();
        assert!(u.negative == u.neutral && u.neutral == u.positive);
        assert!(matches!(sentiment_distribution(&docs(&[&["z"]])), Err(VizError::Unlabeled(_))));
    }

    fn token_lists() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec("[a-d]", 0..8), 0..12)
    }

    proptest! {
        #[test]
        fn unigram_total_matches_token_total(lists in token_lists()) {
            let d: Vec<Document> = lists.iter().enumerate().map(|(i, t)| Document::from_tokens(i.to_string(), t)).collect();
            let uni = ngrams(&d, 1, None).unwrap();
            prop_assert_eq!(uni.entries.iter().map(|e| e.1).sum::<u64>(), lists.iter().map(|t| t.len() as u64).sum::<u64>());
            let cloud = cloud_weights(&d, 3, &BTreeSet::new());
            prop_assert!(cloud.entries.len() <= 3);
            for (w, c) in &cloud.entries {
                prop_assert!(*c > 0);
                let u = uni.entries.iter().find(|(g, _)| g[0] == *w).unwrap().1;
                prop_assert_eq!(u, *c);
            }
            for pair in uni.entries.windows(2) {
                prop_assert!(pair[0].1 > pair[1].1 || (pair[0].1 == pair[1].1 && pair[0].0 < pair[1].0));
            }
        }

        #[test]
        fn distribution_matches_recount(codes in prop::collection::vec(0usize..3, 60)) {
            let d: Vec<Document> = codes.iter().enumerate().map(|(i, &c)| Document::from_tokens(i.to_string(), &["t"]).with_label(SentimentLabel::from_code(c).unwrap())).collect();
            let dist = sentiment_distribution(&d).unwrap();
            for l in SentimentLabel::ALL {
                prop_assert_eq!(dist.count(l), codes.iter().filter(|&&c| c == l.code()).count() as u64);
            }
            prop_assert_eq!(dist.total(), 60);
        }
    }
}
