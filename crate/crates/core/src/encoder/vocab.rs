use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use super::EncoderError;
use crate::preprocess::Document;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
pub const RESERVED_TOKENS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Word-level vocabulary. Ids 0..4 are the reserved tokens; the rest are
/// dense, ordered by descending training frequency then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenVocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TokenVocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the reserved tokens are present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Content id of `token`. Unknown words and literal spellings of the
    /// reserved tokens both map to `[UNK]`, so text can never forge a
    /// `[CLS]`, `[SEP]` or `[PAD]`.
    pub fn id(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&i) if i >= RESERVED_TOKENS.len() => i,
            _ => UNK_ID,
        }
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// One token per line in id order.
    pub fn write<W: Write>(&self, mut writer: W) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(writer, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EncoderError> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(EncoderError::Vocab(format!("line {}: invalid token {line:?}", tokens.len() + 1)));
            }
            tokens.push(line);
        }
        if tokens.len() < RESERVED_TOKENS.len() || tokens[..4] != RESERVED_TOKENS {
            return Err(EncoderError::Vocab("reserved tokens missing from the head of the file".into()));
        }
        let vocab = Self::from_tokens(tokens);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(EncoderError::Vocab("duplicate token".into()));
        }
        Ok(vocab)
    }
}

pub fn build_token_vocab(train: &[Document], min_count: u64) -> Result<TokenVocab, EncoderError> {
    if train.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for d in train {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count.max(1) && !RESERVED_TOKENS.contains(&t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let tokens = RESERVED_TOKENS
        .iter()
        .map(|s| s.to_string())
        .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Ok(TokenVocab::from_tokens(tokens))
}

/// `[CLS] tokens... [SEP] [PAD]...` of length exactly `max_len`, with
/// content truncated to `max_len - 2`. The mask is 1 on non-pad slots.
///
/// # Panics
/// If `max_len < 3`.
pub fn format_input<S: AsRef<str>>(tokens: &[S], vocab: &TokenVocab, max_len: usize) -> (Vec<usize>, Vec<u8>) {
    assert!(max_len >= 3, "max_len must be at least 3");
    let keep = tokens.len().min(max_len - 2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    ids.extend(tokens[..keep].iter().map(|t| vocab.id(t.as_ref())));
    ids.push(SEP_ID);
    let used = ids.len();
    ids.resize(max_len, PAD_ID);
    let mask = (0..max_len).map(|i| u8::from(i < used)).collect();
    (ids, mask)
}
