//! Bootstrap labeling by dictionary counting.
//!
//! Every matched positive phrase adds +1 and every matched negative phrase
//! adds -1. The label is the sign of the sum. Phrases may span several
//! tokens and are matched greedily, longest first, left to right; tokens
//! consumed by a match are not matched again.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::label::SentimentLabel;
use crate::preprocess::{tokenize, Document};

const BUNDLED_POSITIVE: &str = include_str!("../data/lexicon/positive.txt");
const BUNDLED_NEGATIVE: &str = include_str!("../data/lexicon/negative.txt");

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("phrases listed as both positive and negative: {}", .0.join(", "))]
    Overlap(Vec<String>),
    #[error("worksheet: {0}")]
    Csv(#[from] csv::Error),
    #[error("worksheet row {row}: {message}")]
    Worksheet { row: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Debug, Default)]
pub struct LexiconDict {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
    index: HashMap<String, Polarity>,
    longest: usize,
}

/// Outcome of scoring one document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LexiconVerdict {
    pub score: i64,
    pub label: SentimentLabel,
    pub matched_positive: Vec<String>,
    pub matched_negative: Vec<String>,
}

fn normalize_phrase(line: &str) -> Option<String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return None;
    }
    Some(line.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" "))
}

fn parse_phrases(text: &str) -> BTreeSet<String> {
    text.lines().filter_map(normalize_phrase).collect()
}

impl LexiconDict {
    pub fn new<P, N, S, T>(positive: P, negative: N) -> Result<Self, LexiconError>
    where
        P: IntoIterator<Item = S>,
        N: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let positive: BTreeSet<String> = positive
            .into_iter()
            .filter_map(|p| normalize_phrase(p.as_ref()))
            .collect();
        let negative: BTreeSet<String> = negative
            .into_iter()
            .filter_map(|p| normalize_phrase(p.as_ref()))
            .collect();
        Self::from_sets(positive, negative)
    }

    fn from_sets(positive: BTreeSet<String>, negative: BTreeSet<String>) -> Result<Self, LexiconError> {
        let overlap: Vec<String> = positive.intersection(&negative).cloned().collect();
        if !overlap.is_empty() {
            return Err(LexiconError::Overlap(overlap));
        }
        let mut index = HashMap::new();
        let mut longest = 0;
        for (set, polarity) in [(&positive, Polarity::Positive), (&negative, Polarity::Negative)] {
            for phrase in set {
                longest = longest.max(phrase.split(' ').count());
                index.insert(phrase.clone(), polarity);
            }
        }
        Ok(LexiconDict {
            positive,
            negative,
            index,
            longest,
        })
    }

    /// Sample dictionary entries plus the extended word lists shipped with
    /// the crate.
    pub fn bundled() -> Self {
        Self::from_sets(parse_phrases(BUNDLED_POSITIVE), parse_phrases(BUNDLED_NEGATIVE))
            .expect("bundled lexicon has no overlap")
    }

    pub fn positive(&self) -> &BTreeSet<String> {
        &self.positive
    }

    pub fn negative(&self) -> &BTreeSet<String> {
        &self.negative
    }

    /// Same dictionary with the two polarities exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_sets(self.negative.clone(), self.positive.clone()).expect("swap keeps sets disjoint")
    }
}

/// Reads one phrase per line from each file. Phrases are lowercased,
/// trimmed and deduplicated; `#` lines are comments.
pub fn load_lexicon(positive_path: impl AsRef<Path>, negative_path: impl AsRef<Path>) -> Result<LexiconDict, LexiconError> {
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let positive = parse_phrases(&read(positive_path.as_ref())?);
    let negative = parse_phrases(&read(negative_path.as_ref())?);
    LexiconDict::from_sets(positive, negative)
}

pub fn score_document<S: AsRef<str>>(tokens: &[S], dict: &LexiconDict) -> LexiconVerdict {
    let mut matched_positive = Vec::new();
    let mut matched_negative = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let max_len = dict.longest.min(tokens.len() - i);
        let mut advanced = false;
        for len in (1..=max_len).rev() {
            let phrase = tokens[i..i + len]
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<&str>>()
                .join(" ");
            if let Some(polarity) = dict.index.get(&phrase) {
                match polarity {
                    Polarity::Positive => matched_positive.push(phrase),
                    Polarity::Negative => matched_negative.push(phrase),
                }
                i += len;
                advanced = true;
                break;
            }
        }
        if !advanced {
            i += 1;
        }
    }
    let score = matched_positive.len() as i64 - matched_negative.len() as i64;
    LexiconVerdict {
        score,
        label: label_for_score(score),
        matched_positive,
        matched_negative,
    }
}

pub fn label_for_score(score: i64) -> SentimentLabel {
    match score {
        s if s > 0 => SentimentLabel::Positive,
        s if s < 0 => SentimentLabel::Negative,
        _ => SentimentLabel::Neutral,
    }
}

/// One row of the manual review worksheet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorksheetRow {
    pub id: String,
    pub clean_text: String,
    pub score: i64,
    pub proposed_label: SentimentLabel,
    pub final_label: SentimentLabel,
}

#[derive(Clone, Debug)]
pub struct LabelingOutcome {
    pub documents: Vec<Document>,
    pub worksheet: Vec<WorksheetRow>,
    /// Override ids that matched no document.
    pub unknown_overrides: Vec<String>,
}

/// Labels every document by lexicon score, then applies human overrides.
///
/// Scoring runs over the tokens of `clean_text` rather than the
/// stopword-filtered tokens, so phrases containing stopwords (for example
/// "dapat dipercaya") still match.
pub fn label_corpus(
    documents: &[Document],
    dict: &LexiconDict,
    overrides: &BTreeMap<String, SentimentLabel>,
) -> LabelingOutcome {
    let mut out = Vec::with_capacity(documents.len());
    let mut worksheet = Vec::with_capacity(documents.len());
    for doc in documents {
        let verdict = score_document(&tokenize(&doc.clean_text), dict);
        let final_label = overrides.get(&doc.id).copied().unwrap_or(verdict.label);
        worksheet.push(WorksheetRow {
            id: doc.id.clone(),
            clean_text: doc.clean_text.clone(),
            score: verdict.score,
            proposed_label: verdict.label,
            final_label,
        });
        out.push(doc.clone().with_label(final_label));
    }
    let known: BTreeSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
    let unknown_overrides = overrides
        .keys()
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    LabelingOutcome {
        documents: out,
        worksheet,
        unknown_overrides,
    }
}

pub fn write_worksheet<W: io::Write>(writer: W, rows: &[WorksheetRow]) -> Result<(), LexiconError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_worksheet<R: io::Read>(reader: R) -> Result<Vec<WorksheetRow>, LexiconError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row: WorksheetRow = rec.map_err(|e| LexiconError::Worksheet {
            row: i + 2,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Overrides implied by an edited worksheet: every row whose final label
/// differs from the proposed one.
pub fn overrides_from_worksheet(rows: &[WorksheetRow]) -> BTreeMap<String, SentimentLabel> {
    rows.iter()
        .filter(|r| r.final_label != r.proposed_label)
        .map(|r| (r.id.clone(), r.final_label))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct OverrideRow {
    id: String,
    label: SentimentLabel,
}

/// Label override file: CSV with columns `id,label`.
pub fn read_label_overrides<R: io::Read>(reader: R) -> Result<BTreeMap<String, SentimentLabel>, LexiconError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut map = BTreeMap::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row: OverrideRow = rec.map_err(|e| LexiconError::Worksheet {
            row: i + 2,
            message: e.to_string(),
        })?;
        map.insert(row.id, row.label);
    }
    Ok(map)
}

pub fn write_label_overrides<W: io::Write>(writer: W, overrides: &BTreeMap<String, SentimentLabel>) -> Result<(), LexiconError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "label"])?;
    for (id, label) in overrides {
        w.write_record([id.as_str(), label.as_str()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
