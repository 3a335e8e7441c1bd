//! Text normalization: regex cleansing, whitespace tokenization and
//! dictionary stopword removal.
//!
//! All pattern deletion (URLs, mentions, hashtag marks, symbols, bare
//! numbers) happens in [`cleanse`]. [`remove_stopwords`] is a pure
//! dictionary filter.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::label::SentimentLabel;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords-id.txt");
const BUNDLED_STOPWORDS_SOURCE: &str = "ranks.nl/stopwords/indonesian (bundled snapshot)";

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"https?://\S*|www\.\S+|\bt\.co/\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#+(\w)").unwrap());

#[derive(Debug, thiserror::Error)]
pub enum StopwordError {
    #[error("cannot read stopword file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("stopword {word:?} on line {line} is not a single lowercase word")]
    InvalidEntry { line: usize, word: String },
}

/// A cleaned, tokenized post flowing through labeling, training and
/// evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub clean_text: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SentimentLabel>,
}

impl Document {
    /// Runs the full pipeline: `cleanse`, `tokenize`, `remove_stopwords`.
    pub fn from_raw(id: impl Into<String>, raw_text: impl Into<String>, stopwords: &StopwordDict) -> Self {
        let raw_text = raw_text.into();
        let clean_text = cleanse(&raw_text);
        let tokens = remove_stopwords(&tokenize(&clean_text), stopwords);
        Document {
            id: id.into(),
            raw_text,
            clean_text,
            tokens,
            label: None,
        }
    }

    pub fn with_label(mut self, label: SentimentLabel) -> Self {
        self.label = Some(label);
        self
    }

    /// Builds a document straight from tokens. Used by fixtures and tests
    /// that bypass cleansing.
    pub fn from_tokens<S: AsRef<str>>(id: impl Into<String>, tokens: &[S]) -> Self {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        let text = tokens.join(" ");
        Document {
            id: id.into(),
            raw_text: text.clone(),
            clean_text: text,
            tokens,
            label: None,
        }
    }
}

/// Normalizes raw post text. Rules, applied in order:
///
/// 1. lowercase
/// 2. delete URLs (`http://`, `https://`, `www.`, `t.co/`)
/// 3. delete `@mentions`
/// 4. strip `#` from hashtags, keeping the word
/// 5. replace every non-alphanumeric character with a space, except a
///    hyphen with alphanumerics on both sides
/// 6. drop tokens without any letter (bare numbers) and tokens still
///    containing `http`
/// 7. collapse whitespace and trim
///
/// The function is idempotent.
pub fn cleanse(raw_text: &str) -> String {
    let text = raw_text.to_lowercase();
    let text = URL.replace_all(&text, " ");
    let text = MENTION.replace_all(&text, " ");
    let text = HASHTAG.replace_all(&text, "$1");

    let chars: Vec<char> = text.chars().collect();
    let mut stripped = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        let inner_hyphen = c == '-' && i > 0 && chars[i - 1].is_alphanumeric() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_hyphen {
            stripped.push(c);
        } else {
            stripped.push(' ');
        }
    }

    stripped
        .split_whitespace()
        .filter(|tok| tok.chars().any(char::is_alphabetic) && !tok.contains("http"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits cleansed text on whitespace.
pub fn tokenize(clean_text: &str) -> Vec<String> {
    clean_text.split_whitespace().map(str::to_string).collect()
}

/// Order-preserving filter dropping exact dictionary members.
pub fn remove_stopwords(tokens: &[String], dict: &StopwordDict) -> Vec<String> {
    tokens.iter().filter(|t| !dict.contains(t)).cloned().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StopwordDict {
    words: BTreeSet<String>,
    source_name: String,
}

impl StopwordDict {
    pub fn empty() -> Self {
        StopwordDict {
            words: BTreeSet::new(),
            source_name: "empty".to_string(),
        }
    }

    /// The bundled Indonesian snapshot.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS, BUNDLED_STOPWORDS_SOURCE).expect("bundled stopword list is valid")
    }

    /// Parses one word per line; blank lines and `#` comments are skipped.
    /// Entries are trimmed and must already be lowercase single words.
    pub fn parse(text: &str, source_name: impl Into<String>) -> Result<Self, StopwordError> {
        let mut words = BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            let word = line.trim();
            if word.is_empty() || word.starts_with('#') {
                continue;
            }
            if word.chars().any(char::is_whitespace) || word.to_lowercase() != word {
                return Err(StopwordError::InvalidEntry {
                    line: idx + 1,
                    word: word.to_string(),
                });
            }
            words.insert(word.to_string());
        }
        Ok(StopwordDict {
            words,
            source_name: source_name.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StopwordError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| StopwordError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn extend<I, S>(&mut self, words: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for w in words {
            let w = w.as_ref().trim().to_lowercase();
            if !w.is_empty() && !w.chars().any(char::is_whitespace) {
                self.words.insert(w);
            }
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cleanse_example_sentence() {
        assert_eq!(cleanse("Jualan saya RUGI selama PPKM!!"), "jualan saya rugi selama ppkm");
    }

    #[test]
    fn cleanse_empty() {
        assert_eq!(cleanse(""), "");
    }

    #[test]
    fn cleanse_url_mention_hashtag() {
        assert_eq!(cleanse("cek https://t.co/abc @menkes #PPKM"), "cek ppkm");
        assert_eq!(cleanse("baca www.example.com/x dan t.co/zzz ya"), "baca dan ya");
    }

    #[test]
    fn cleanse_digits_and_hyphens() {
        assert_eq!(cleanse("Covid19 naik 2021 kasus covid-19"), "covid19 naik kasus covid-19");
        assert_eq!(cleanse("-ppkm- level--4 a-"), "ppkm level a");
        assert_eq!(cleanse("senang 😀 sekali"), "senang sekali");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("ppkm diperpanjang lagi"), strings(&["ppkm", "diperpanjang", "lagi"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("jualan saya rugi selama ppkm").len(), 5);
    }

    #[test]
    fn stopword_removal() {
        let dict = StopwordDict::bundled();
        assert!(dict.contains("yang"));
        assert_eq!(
            remove_stopwords(&strings(&["ppkm", "yang", "berat"]), &dict),
            strings(&["ppkm", "berat"])
        );
        let tokens = strings(&["ppkm", "yang"]);
        assert_eq!(remove_stopwords(&tokens, &StopwordDict::empty()), tokens);
        assert!(remove_stopwords(&strings(&["yang", "dan"]), &dict).is_empty());
    }

    #[test]
    fn stopword_file_format() {
        let dict = StopwordDict::parse("# comment\nyang\n\n  dan  \n", "inline").unwrap();
        assert_eq!(dict.len(), 2);
        assert_eq!(dict.source_name(), "inline");
        assert!(matches!(
            StopwordDict::parse("Yang\n", "x"),
            Err(StopwordError::InvalidEntry { line: 1, .. })
        ));
        assert!(StopwordDict::parse("dua kata\n", "x").is_err());
    }

    #[test]
    fn bundled_dictionary_invariants() {
        let dict = StopwordDict::bundled();
        assert!(dict.len() > 700);
        for w in dict.words() {
            assert_eq!(w, w.to_lowercase());
            assert!(!w.contains(char::is_whitespace));
        }
    }

    #[test]
    fn document_pipeline() {
        let doc = Document::from_raw("1", "Jualan saya RUGI selama PPKM!!", &StopwordDict::bundled());
        assert_eq!(doc.clean_text, "jualan saya rugi selama ppkm");
        assert_eq!(doc.tokens, strings(&["jualan", "rugi", "ppkm"]));
        assert_eq!(doc.label, None);
    }

    proptest! {
        #[test]
        fn cleanse_is_idempotent(s in "\\PC{0,80}") {
            let once = cleanse(&s);
            prop_assert_eq!(cleanse(&once), once);
        }

        #[test]
        fn cleanse_idempotent_on_tweet_like_text(
            s in "([A-Za-z0-9#@:/._!?-]{1,12}|https?://[a-z./]{1,10}| ){0,12}"
        ) {
            let once = cleanse(&s);
            prop_assert_eq!(cleanse(&once), once);
        }

        #[test]
        fn cleansed_tokens_have_no_markup(
            s in "([A-Za-z0-9#@:/._!?-]{1,12}|https?://[a-z./]{1,10}|http| ){0,12}"
        ) {
            for tok in tokenize(&cleanse(&s)) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.contains('#') && !tok.contains('@') && !tok.contains("http"), "{}", tok);
            }
        }

        #[test]
        fn stopword_output_is_subsequence(tokens in proptest::collection::vec("[a-z]{1,5}", 0..20)) {
            let dict = StopwordDict::parse("a\nab\nabc\nb\n", "t").unwrap();
            let out = remove_stopwords(&tokens, &dict);
            let mut it = tokens.iter();
            for o in &out {
                prop_assert!(it.any(|t| t == o));
            }
        }

        #[test]
        fn pipeline_is_deterministic(s in "\\PC{0,60}") {
            let dict = StopwordDict::bundled();
            prop_assert_eq!(Document::from_raw("x", s.clone(), &dict), Document::from_raw("x", s, &dict));
        }
    }
}
