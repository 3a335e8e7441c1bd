use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::label::SentimentLabel;
use crate::preprocess::Document;

// Absorbs representation error in fraction * n before flooring, so that
// 293/5315 of 5315 documents is 293 and not 292.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SplitError {
    #[error("split fractions must each lie in [0, 1] and sum to 1 (got {0}, {1}, {2})")]
    BadFractions(f64, f64, f64),
    #[error("cannot split an empty corpus")]
    Empty,
    #[error("need at least 3 documents for a three-way split, got {0}")]
    TooFew(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64, stratified: bool) -> Result<Self, SplitError> {
        let spec = SplitSpec {
            train_fraction: train,
            validation_fraction: validation,
            test_fraction: test,
            seed,
            stratified,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fractions proportional to the given non-negative weights.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn from_ratio(weights: [f64; 3], seed: u64, stratified: bool) -> Result<Self, SplitError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(SplitError::BadFractions(weights[0], weights[1], weights[2]));
        }
        Self::new(weights[0] / total, weights[1] / total, weights[2] / total, seed, stratified)
    }

    /// 4877 : 293 : 145 train/validation/test proportions.
    pub fn paper_proportions(seed: u64, stratified: bool) -> Self {
        Self::from_ratio([4877.0, 293.0, 145.0], seed, stratified).expect("valid ratio")
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let f = [self.train_fraction, self.validation_fraction, self.test_fraction];
        let in_range = f.iter().all(|x| (0.0..=1.0).contains(x));
        if !in_range || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SplitError::BadFractions(f[0], f[1], f[2]));
        }
        Ok(())
    }

    /// Bucket sizes for `n` items: validation and test are floored, the
    /// remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let take = |frac: f64| ((frac * n as f64 + FLOOR_SLACK).floor() as usize).min(n);
        let validation = take(self.validation_fraction);
        let test = take(self.test_fraction).min(n - validation);
        (n - validation - test, validation, test)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle-then-bucket partition. Each bucket keeps input order.
///
/// In stratified mode every label group (plus unlabeled documents) is
/// shuffled and bucketed on its own.
pub fn split(documents: &[Document], spec: &SplitSpec) -> Result<Split<Document>, SplitError> {
    spec.validate()?;
    let n = documents.len();
    if n == 0 {
        return Err(SplitError::Empty);
    }
    let all_positive = spec.train_fraction > 0.0 && spec.validation_fraction > 0.0 && spec.test_fraction > 0.0;
    if all_positive && n < 3 {
        return Err(SplitError::TooFew(n));
    }

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut g: Vec<Vec<usize>> = vec![Vec::new(); 4];
        for (i, d) in documents.iter().enumerate() {
            g[d.label.map_or(3, SentimentLabel::code)].push(i);
        }
        g
    } else {
        vec![(0..n).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut buckets: [Vec<usize>; 3] = Default::default();
    for mut group in groups {
        group.shuffle(&mut rng);
        let (n_train, n_val, _) = spec.sizes(group.len());
        buckets[0].extend_from_slice(&group[..n_train]);
        buckets[1].extend_from_slice(&group[n_train..n_train + n_val]);
        buckets[2].extend_from_slice(&group[n_train + n_val..]);
    }
    let [train, validation, test] = buckets.map(|mut idx| {
        idx.sort_unstable();
        idx.into_iter().map(|i| documents[i].clone()).collect::<Vec<_>>()
    });
    Ok(Split { train, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(labels: &[(SentimentLabel, usize)]) -> Vec<Document> {
        let mut out = Vec::new();
        for &(label, count) in labels {
            for _ in 0..count {
                let id = format!("d{}", out.len());
                out.push(Document::from_tokens(id, &["x"]).with_label(label));
            }
        }
        out
    }

    #[test]
    fn paper_counts() {
        let spec = SplitSpec::paper_proportions(1, false);
        assert_eq!(spec.sizes(5315), (4877, 293, 145));
        let docs = corpus(&[(SentimentLabel::Negative, 5315)]);
        let s = split(&docs, &spec).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (4877, 293, 145));
    }

    #[test]
    fn deterministic_for_seed() {
        let docs = corpus(&[(SentimentLabel::Neutral, 10)]);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 7, false).unwrap();
        let a = split(&docs, &spec).unwrap();
        assert_eq!(a, split(&docs, &spec).unwrap());
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (8, 1, 1));
        let other = split(&docs, &SplitSpec { seed: 8, ..spec }).unwrap();
        assert_eq!(other.train.len(), 8);
    }

    // Reference oracle: shuffle each class with the same RNG stream, then
    // cut val/test by floor and leave the rest to train.
    fn oracle_train_counts(counts: &[(SentimentLabel, usize)], spec: &SplitSpec) -> Vec<usize> {
        counts
            .iter()
            .map(|&(_, c)| c - (spec.validation_fraction * c as f64 + 1e-9).floor() as usize - (spec.test_fraction * c as f64 + 1e-9).floor() as usize)
            .collect()
    }

    #[test]
    fn stratified_counts() {
        let classes = [(SentimentLabel::Negative, 90), (SentimentLabel::Positive, 10)];
        let docs = corpus(&classes);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 3, true).unwrap();
        let s = split(&docs, &spec).unwrap();
        let count = |v: &[Document], l| v.iter().filter(|d| d.label == Some(l)).count();
        assert_eq!(count(&s.train, SentimentLabel::Negative), 72);
        assert_eq!(count(&s.train, SentimentLabel::Positive), 8);
        assert_eq!(oracle_train_counts(&classes, &spec), vec![72, 8]);
        assert_eq!(count(&s.test, SentimentLabel::Positive), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(SplitSpec::new(0.5, 0.3, 0.3, 0, false), Err(SplitError::BadFractions(..))));
        assert!(SplitSpec::new(1.2, -0.1, -0.1, 0, false).is_err());
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 0, false).unwrap();
        assert_eq!(split(&[], &spec), Err(SplitError::Empty));
        let two = corpus(&[(SentimentLabel::Neutral, 2)]);
        assert_eq!(split(&two, &spec), Err(SplitError::TooFew(2)));
        let only_train = SplitSpec::new(1.0, 0.0, 0.0, 0, false).unwrap();
        assert_eq!(split(&two, &only_train).unwrap().train.len(), 2);
    }

    proptest! {
        #[test]
        fn partition_is_exact(n in 3usize..200, seed in any::<u64>(), stratified in any::<bool>(), a in 1u32..10, b in 1u32..10, c in 1u32..10) {
            let docs: Vec<Document> = (0..n)
                .map(|i| Document::from_tokens(format!("d{i}"), &["x"]).with_label(SentimentLabel::ALL[i % 3]))
                .collect();
            let spec = SplitSpec::from_ratio([a as f64, b as f64, c as f64], seed, stratified).unwrap();
            let s = split(&docs, &spec).unwrap();
            prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), n);
            let mut ids: Vec<String> = s.train.iter().chain(&s.validation).chain(&s.test).map(|d| d.id.clone()).collect();
            ids.sort();
            let mut expected: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
        }
    }
}
