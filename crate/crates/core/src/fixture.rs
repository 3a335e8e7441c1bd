//! Seeded synthetic corpora whose classes use disjoint vocabularies.
//!
//! Negative and positive words come from the bundled lexicon, neutral words
//! from neither list, so lexicon labeling recovers the generating label.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::TweetRecord;
use crate::label::SentimentLabel;
use crate::preprocess::Document;

pub const NEGATIVE_POOL: [&str; 12] = ["rugi", "susah", "kecewa", "buruk", "parah", "bangkrut", "sedih", "lelah", "resah", "sulit", "takut", "gagal"];
pub const NEUTRAL_POOL: [&str; 12] = ["jadwal", "kabar", "informasi", "rapat", "kantor", "pasar", "kota", "warga", "vaksin", "stasiun", "cuaca", "berita"];
pub const POSITIVE_POOL: [&str; 12] = ["senang", "bagus", "aman", "sukses", "lancar", "hebat", "puas", "nyaman", "sehat", "semangat", "peduli", "tertib"];

/// Tokens shared by every class; they carry no label information.
const SHARED: [&str; 2] = ["ppkm", "covid"];
const FILLER: [&str; 4] = ["yang", "di", "dan", "ini"];

pub fn pool(label: SentimentLabel) -> &'static [&'static str; 12] {
    match label {
        SentimentLabel::Negative => &NEGATIVE_POOL,
        SentimentLabel::Neutral => &NEUTRAL_POOL,
        SentimentLabel::Positive => &POSITIVE_POOL,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub per_class: usize,
    /// Inclusive bounds on the number of class words per document.
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            per_class: 200,
            min_words: 3,
            max_words: 8,
            seed: 2021,
        }
    }
}

fn class_words(rng: &mut ChaCha8Rng, label: SentimentLabel, spec: &SyntheticSpec) -> Vec<&'static str> {
    let n = rng.random_range(spec.min_words..=spec.max_words.max(spec.min_words));
    (0..n).map(|_| *pool(label).choose(rng).expect("non-empty pool")).collect()
}

/// `3 * per_class` labeled documents, classes interleaved
/// (negative, neutral, positive, negative, ...).
pub fn separable_documents(spec: &SyntheticSpec) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::with_capacity(spec.per_class * 3);
    for i in 0..spec.per_class {
        for label in SentimentLabel::ALL {
            let words = class_words(&mut rng, label, spec);
            docs.push(Document::from_tokens(format!("syn-{:05}", i * 3 + label.code()), &words).with_label(label));
        }
    }
    docs
}

/// Raw posts for an end-to-end pipeline run, plus the generating label of
/// every relevant, non-duplicate post.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTweets {
    pub records: Vec<TweetRecord>,
    pub truth: BTreeMap<String, SentimentLabel>,
}

/// Each labeled post mixes class words with shared keywords, stopword
/// filler, a hashtag, a mention and a link. Every tenth post is followed
/// by a copy that differs only in case and spacing, and every seventh by a
/// post without any keyword.
pub fn synthetic_tweets(spec: &SyntheticSpec) -> SyntheticTweets {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start: DateTime<Utc> = Utc.with_ymd_and_hms(2021, 7, 3, 0, 0, 0).single().expect("valid date");
    let mut records = Vec::new();
    let mut truth = BTreeMap::new();
    let mut next_id = 0usize;
    let mut push = |records: &mut Vec<TweetRecord>, text: String| {
        next_id += 1;
        let id = format!("{}", 1_411_000_000_000u64 + next_id as u64);
        records.push(TweetRecord {
            id: id.clone(),
            text,
            created_at: Some(start + Duration::minutes(next_id as i64)),
            matched_keywords: Vec::new(),
        });
        id
    };
    for i in 0..spec.per_class * 3 {
        let label = SentimentLabel::ALL[i % 3];
        let mut words: Vec<String> = class_words(&mut rng, label, spec).into_iter().map(str::to_string).collect();
        let filler = *FILLER.choose(&mut rng).expect("non-empty");
        words.insert(rng.random_range(0..=words.len()), filler.to_string());
        let keyword = SHARED[i % 2];
        let text = format!("@warga{} {} #{} https://t.co/x{i}", i % 17, words.join(" "), keyword.to_uppercase());
        let id = push(&mut records, text.clone());
        truth.insert(id, label);
        if i % 10 == 9 {
            push(&mut records, format!("  {}  ", text.to_uppercase()));
        }
        if i % 7 == 6 {
            push(&mut records, format!("lagi di {} {}", NEUTRAL_POOL[i % 12], FILLER[i % 4]));
        }
    }
    SyntheticTweets { records, truth }
}
