//! Sentiment classification pipeline for short social-media posts.
//!
//! The crate covers every stage between raw collected posts and a model
//! comparison table:
//!
//! * [`corpus`]: file ingestion, a clock-driven request rate limiter,
//!   duplicate removal, keyword relevance filtering and seeded splits.
//! * [`preprocess`]: regex cleansing, whitespace tokenization and
//!   dictionary stopword removal into [`Document`]s.
//! * [`lexicon`]: bootstrap labeling by counting positive and negative
//!   dictionary phrases.
//! * [`bow`]: bag-of-words features, Multinomial Naive Bayes and a
//!   one-vs-rest linear SVM.
//! * [`encoder`]: a BERT-style transformer classifier trained from scratch
//!   with hand-written backpropagation and Adam.
//! * [`eval`]: confusion matrices, precision/recall/F and model comparison.
//! * [`viz`]: n-gram tables, word-cloud weights and SVG charts.
//! * [`fixture`]: seeded synthetic corpora with class-exclusive vocabulary.

pub mod bow;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod fixture;
pub mod label;
pub mod lexicon;
pub mod preprocess;
pub mod viz;

pub use label::SentimentLabel;
pub use preprocess::Document;
