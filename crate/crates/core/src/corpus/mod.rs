//! Raw post ingestion, duplicate removal, keyword relevance filtering and
//! seeded dataset splits.

mod ratelimit;
mod split;

pub use ratelimit::{simulate_fetch, Clock, FetchedPage, Permit, RateLimitError, RateLimitState, SimulatedClock};
pub use split::{split, Split, SplitError, SplitSpec};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("read error: {0}")]
    Read(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv header lacks required column {0:?}")]
    MissingColumn(&'static str),
    #[error("keyword list is empty")]
    EmptyKeywords,
    #[error("verdict file row {row}: {message}")]
    Verdict { row: usize, message: String },
    #[error("unknown record format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
}

/// One collected post.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub matched_keywords: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KeywordMatch {
    /// At least one keyword must occur.
    #[default]
    Any,
    /// Every keyword must occur.
    All,
}

/// Lowercased topical keywords and how many of them a record must contain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Keywords {
    words: Vec<String>,
    mode: KeywordMatch,
}

impl Keywords {
    pub fn new<I, S>(words: I, mode: KeywordMatch) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let words: Vec<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty() && seen.insert(w.clone()))
            .collect();
        if words.is_empty() {
            return Err(CorpusError::EmptyKeywords);
        }
        Ok(Keywords { words, mode })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Keywords occurring in `text`, case-insensitively, in configured order.
    pub fn matches(&self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        self.words.iter().filter(|w| lower.contains(w.as_str())).cloned().collect()
    }

    pub fn is_relevant(&self, text: &str) -> bool {
        let found = self.matches(text).len();
        match self.mode {
            KeywordMatch::Any => found > 0,
            KeywordMatch::All => found == self.words.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Some(RecordFormat::Jsonl),
            "csv" => Some(RecordFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for RecordFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(RecordFormat::Jsonl),
            "csv" => Ok(RecordFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// A row that could not be turned into a record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestIssue {
    Malformed { line: u64, message: String },
    DuplicateId { id: String, first_line: u64, line: u64 },
}

impl IngestIssue {
    pub fn line(&self) -> u64 {
        match self {
            IngestIssue::Malformed { line, .. } | IngestIssue::DuplicateId { line, .. } => *line,
        }
    }
}

impl std::fmt::Display for IngestIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IngestIssue::Malformed { line, message } => write!(f, "line {line}: {message}"),
            IngestIssue::DuplicateId { id, first_line, line } => {
                write!(f, "line {line}: duplicate id {id:?} (first seen on line {first_line})")
            }
        }
    }
}

/// Records in file order plus every rejected row.
#[derive(Clone, Debug, Default)]
pub struct Ingested {
    pub records: Vec<TweetRecord>,
    pub issues: Vec<IngestIssue>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    created_at: Option<String>,
}

fn parse_timestamp(s: Option<&str>) -> Result<Option<DateTime<Utc>>, String> {
    match s.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map(|t| Some(t.with_timezone(&Utc)))
            .map_err(|e| format!("created_at {s:?} is not RFC 3339: {e}")),
    }
}

struct Collector<'a> {
    keywords: &'a Keywords,
    first_seen: HashMap<String, u64>,
    out: Ingested,
}

impl Collector<'_> {
    fn push(&mut self, line: u64, id: Option<String>, text: Option<String>, created_at: Option<&str>) {
        let id = match id.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()) {
            Some(id) => id,
            None => return self.malformed(line, "missing or empty id".into()),
        };
        let text = match text {
            Some(t) => t,
            None => return self.malformed(line, "missing text".into()),
        };
        let created_at = match parse_timestamp(created_at) {
            Ok(t) => t,
            Err(message) => return self.malformed(line, message),
        };
        if let Some(&first_line) = self.first_seen.get(&id) {
            self.out.issues.push(IngestIssue::DuplicateId { id, first_line, line });
            return;
        }
        self.first_seen.insert(id.clone(), line);
        let matched_keywords = self.keywords.matches(&text);
        self.out.records.push(TweetRecord {
            id,
            text,
            created_at,
            matched_keywords,
        });
    }

    fn malformed(&mut self, line: u64, message: String) {
        self.out.issues.push(IngestIssue::Malformed { line, message });
    }
}

/// Reads records from a JSONL or CSV file.
///
/// Rows are streamed one at a time. Malformed rows and repeated ids are
/// reported in [`Ingested::issues`] with their line numbers; the first
/// occurrence of an id wins.
pub fn ingest_file(path: impl AsRef<Path>, format: RecordFormat, keywords: &Keywords) -> Result<Ingested, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(BufReader::new(file), format, keywords)
}

pub fn ingest_reader<R: Read>(reader: R, format: RecordFormat, keywords: &Keywords) -> Result<Ingested, CorpusError> {
    let mut c = Collector {
        keywords,
        first_seen: HashMap::new(),
        out: Ingested::default(),
    };
    match format {
        RecordFormat::Jsonl => {
            for (idx, line) in BufReader::new(reader).lines().enumerate() {
                let line_no = idx as u64 + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RawRecord>(&line) {
                    Ok(raw) => {
                        let id = raw.id.map(|v| match v {
                            serde_json::Value::String(s) => s,
                            other => other.to_string(),
                        });
                        c.push(line_no, id, raw.text, raw.created_at.as_deref());
                    }
                    Err(e) => c.malformed(line_no, format!("invalid JSON: {e}")),
                }
            }
        }
        RecordFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
            let headers = rdr.headers()?.clone();
            let column = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
            let id_col = column("id").ok_or(CorpusError::MissingColumn("id"))?;
            let text_col = column("text").ok_or(CorpusError::MissingColumn("text"))?;
            let ts_col = column("created_at");
            let mut record = csv::StringRecord::new();
            loop {
                match rdr.read_record(&mut record) {
                    Ok(false) => break,
                    Ok(true) => {
                        let line = record.position().map_or(0, |p| p.line());
                        c.push(
                            line,
                            record.get(id_col).map(str::to_string),
                            record.get(text_col).map(str::to_string),
                            ts_col.and_then(|i| record.get(i)),
                        );
                    }
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line());
                        if !e.is_io_error() {
                            c.malformed(line, e.to_string());
                        } else {
                            return Err(e.into());
                        }
                    }
                }
            }
        }
    }
    Ok(c.out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DedupeKey {
    Id,
    #[default]
    NormalizedText,
}

/// Lowercase and collapse whitespace.
pub fn normalize_text(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keeps the first occurrence of each key; kept and removed both preserve
/// input order.
pub fn dedupe(records: &[TweetRecord], key: DedupeKey) -> (Vec<TweetRecord>, Vec<TweetRecord>) {
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for r in records {
        let k = match key {
            DedupeKey::Id => r.id.clone(),
            DedupeKey::NormalizedText => normalize_text(&r.text),
        };
        if seen.insert(k) {
            kept.push(r.clone());
        } else {
            removed.push(r.clone());
        }
    }
    (kept, removed)
}

/// Manual relevance decision for one record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Drop,
}

pub type Verdicts = BTreeMap<String, Verdict>;

#[derive(Clone, Debug, Default)]
pub struct FilterOutcome {
    pub kept: Vec<TweetRecord>,
    pub dropped_by_keyword: Vec<TweetRecord>,
    pub dropped_by_verdict: Vec<TweetRecord>,
    /// Verdict ids that match no record.
    pub unknown_verdicts: Vec<String>,
}

/// Keeps keyword-relevant records. A verdict for a record's id overrides
/// the keyword decision in either direction.
pub fn filter_relevant(records: &[TweetRecord], keywords: &Keywords, verdicts: &Verdicts) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for r in records {
        match verdicts.get(&r.id) {
            Some(Verdict::Keep) => out.kept.push(r.clone()),
            Some(Verdict::Drop) => out.dropped_by_verdict.push(r.clone()),
            None if keywords.is_relevant(&r.text) => out.kept.push(r.clone()),
            None => out.dropped_by_keyword.push(r.clone()),
        }
    }
    let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    out.unknown_verdicts = verdicts.keys().filter(|id| !ids.contains(id.as_str())).cloned().collect();
    out
}

#[derive(Serialize, Deserialize)]
struct VerdictRow {
    id: String,
    verdict: Verdict,
}

/// Verdict file: CSV with columns `id,verdict`, verdict in {keep, drop}.
pub fn read_verdicts<R: Read>(reader: R) -> Result<Verdicts, CorpusError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Verdicts::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let row: VerdictRow = row.map_err(|e| CorpusError::Verdict {
            row: i + 2,
            message: e.to_string(),
        })?;
        out.insert(row.id, row.verdict);
    }
    Ok(out)
}

pub fn write_verdicts<W: io::Write>(writer: W, verdicts: &Verdicts) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "verdict"])?;
    for (id, v) in verdicts {
        let v = match v {
            Verdict::Keep => "keep",
            Verdict::Drop => "drop",
        };
        w.write_record([id.as_str(), v])?;
    }
    w.flush()?;
    Ok(())
}

/// Canonical JSONL serialization, one record per line.
pub fn write_jsonl<W: io::Write, T: Serialize>(mut writer: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_jsonl<R: Read, T: serde::de::DeserializeOwned>(reader: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Read(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("line {}: {e}", i + 1),
        )))?;
        out.push(item);
    }
    Ok(out)
}
