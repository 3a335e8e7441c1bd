use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Three-way sentiment class. The integer codes are part of every file
/// format and also define the tie-breaking order of all argmax decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Positive => "positive",
        }
    }

    /// Index of the largest score; ties go to the lowest label code.
    pub fn argmax(scores: &[f64; 3]) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        Self::ALL[best]
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown sentiment label {0:?} (expected negative, neutral or positive)")]
pub struct ParseLabelError(pub String);

impl FromStr for SentimentLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" | "0" => Ok(SentimentLabel::Negative),
            "neutral" | "neu" | "1" => Ok(SentimentLabel::Neutral),
            "positive" | "pos" | "2" => Ok(SentimentLabel::Positive),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_fixed() {
        assert_eq!(SentimentLabel::Negative.code(), 0);
        assert_eq!(SentimentLabel::Neutral.code(), 1);
        assert_eq!(SentimentLabel::Positive.code(), 2);
        assert_eq!(SentimentLabel::from_code(3), None);
    }

    #[test]
    fn argmax_ties_prefer_lowest_code() {
        assert_eq!(SentimentLabel::argmax(&[1.0, 1.0, 1.0]), SentimentLabel::Negative);
        assert_eq!(SentimentLabel::argmax(&[0.0, 2.0, 2.0]), SentimentLabel::Neutral);
        assert_eq!(SentimentLabel::argmax(&[0.0, 1.0, 2.0]), SentimentLabel::Positive);
    }

    #[test]
    fn parses_names_and_codes() {
        assert_eq!("Positive".parse::<SentimentLabel>().unwrap(), SentimentLabel::Positive);
        assert_eq!("0".parse::<SentimentLabel>().unwrap(), SentimentLabel::Negative);
        assert!("meh".parse::<SentimentLabel>().is_err());
    }
}
