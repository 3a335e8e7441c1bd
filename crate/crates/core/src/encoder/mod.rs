//! BERT-style transformer classifier trained from random initialization.
//!
//! Inputs are `[CLS] tokens [SEP] [PAD]...` id sequences over a word-level
//! [`TokenVocab`]. The network sums token and learned position embeddings,
//! applies post-norm encoder layers (masked multi-head attention, then a
//! GELU feedforward block, each with a residual connection and layer norm)
//! and maps the final `[CLS]` state through an affine head to 3 logits.
//! Gradients are computed by hand and checked against finite differences
//! in the tests.

mod checkpoint;
mod config;
mod model;
mod params;
mod train;
mod vocab;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{EncoderConfig, TrainProfile};
pub use model::{attention_weights, cross_entropy, forward, layer_norm, loss_and_gradient, normalize_rows, softmax, Forward, Mode, LAYER_NORM_EPS};
pub use params::{EncoderParams, LayerParams, Tensor, TensorMut};
pub use train::{fine_tune, fine_tune_from, predict, Adam, EpochRecord, History, INIT_STD};
pub use vocab::{build_token_vocab, format_input, TokenVocab, CLS_ID, PAD_ID, RESERVED_TOKENS, SEP_ID, UNK_ID};

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid training profile: {0}")]
    InvalidProfile(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("document {0} has no label")]
    Unlabeled(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite values in {context}")]
    NonFinite { context: String },
    #[error("training diverged at epoch {epoch} step {step}: {source}")]
    Diverged {
        epoch: usize,
        step: usize,
        #[source]
        source: Box<EncoderError>,
    },
    #[error("vocabulary file: {0}")]
    Vocab(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl EncoderError {
    fn at(self, epoch: usize, step: usize) -> Self {
        EncoderError::Diverged {
            epoch,
            step,
            source: Box::new(self),
        }
    }
}
