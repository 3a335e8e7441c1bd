use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{accumulate_gradient, cross_entropy, forward, softmax, Mode};
use super::{format_input, EncoderConfig, EncoderError, EncoderParams, TokenVocab, TrainProfile};
use crate::label::SentimentLabel;
use crate::preprocess::Document;

pub const INIT_STD: f64 = 0.02;

/// Adam with bias-corrected moment estimates.
pub struct Adam {
    first: EncoderParams,
    second: EncoderParams,
    step: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(params: &EncoderParams, profile: &TrainProfile) -> Self {
        Adam {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            beta1: profile.adam_beta1,
            beta2: profile.adam_beta2,
            epsilon: profile.adam_epsilon,
        }
    }

    pub fn update(&mut self, params: &mut EncoderParams, grads: &EncoderParams, learning_rate: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(self.first.tensors_mut()).zip(self.second.tensors_mut()) {
            for (((p, &g), m), v) in p.data.iter_mut().zip(g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// `None` when the validation set is empty.
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_acc,val_loss,val_acc,batch_size,learning_rate";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                r.train_acc,
                opt(r.val_loss),
                opt(r.val_acc),
                self.batch_size,
                self.learning_rate
            );
        }
        out
    }
}

struct Encoded {
    ids: Vec<usize>,
    mask: Vec<u8>,
    label: usize,
}

fn encode_all(docs: &[Document], vocab: &TokenVocab, config: &EncoderConfig) -> Result<Vec<Encoded>, EncoderError> {
    docs.iter()
        .map(|d| {
            let label = d.label.ok_or_else(|| EncoderError::Unlabeled(d.id.clone()))?;
            let (ids, mask) = format_input(&d.tokens, vocab, config.max_sequence_length);
            Ok(Encoded { ids, mask, label: label.code() })
        })
        .collect()
}

/// Mean eval-mode loss and accuracy.
fn evaluate(data: &[Encoded], params: &EncoderParams, config: &EncoderConfig) -> Result<Option<(f64, f64)>, EncoderError> {
    if data.is_empty() {
        return Ok(None);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for e in data {
        let f = forward(&e.ids, &e.mask, params, config, Mode::Eval)?;
        loss += cross_entropy(&f.logits, e.label);
        correct += usize::from(SentimentLabel::argmax(&f.logits).code() == e.label);
    }
    let n = data.len() as f64;
    Ok(Some((loss / n, correct as f64 / n)))
}

/// Initializes parameters from `profile.seed` and trains.
pub fn fine_tune(train: &[Document], validation: &[Document], vocab: &TokenVocab, config: &EncoderConfig, profile: &TrainProfile) -> Result<(EncoderParams, History), EncoderError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let params = EncoderParams::init(config, INIT_STD, &mut rng);
    fine_tune_from(params, train, validation, vocab, config, profile)
}

/// Minimizes mean cross-entropy with Adam, starting from `params`.
///
/// Batch order and dropout draw from one ChaCha8 stream seeded by
/// `profile.seed`. After every epoch both sets are scored in eval mode, so
/// the history reflects the parameters at the end of that epoch.
pub fn fine_tune_from(mut params: EncoderParams, train: &[Document], validation: &[Document], vocab: &TokenVocab, config: &EncoderConfig, profile: &TrainProfile) -> Result<(EncoderParams, History), EncoderError> {
    config.validate()?;
    profile.validate()?;
    if train.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    if !params.matches(config) {
        return Err(EncoderError::Shape("parameters do not match the configuration".into()));
    }
    if vocab.len() > config.vocab_size {
        return Err(EncoderError::Shape(format!("vocabulary of {} exceeds vocab_size {}", vocab.len(), config.vocab_size)));
    }
    let train_set = encode_all(train, vocab, config)?;
    let val_set = encode_all(validation, vocab, config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(&params, profile);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History {
        batch_size: profile.batch_size,
        learning_rate: profile.learning_rate,
        epochs: Vec::with_capacity(profile.epochs),
    };
    let mut grads = params.zeros_like();
    for epoch in 1..=profile.epochs {
        order.shuffle(&mut rng);
        for (step, batch) in order.chunks(profile.batch_size).enumerate() {
            for t in grads.tensors_mut() {
                t.data.fill(0.0);
            }
            let weight = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let e = &train_set[i];
                batch_loss += accumulate_gradient(&e.ids, &e.mask, e.label, weight, &params, config, Mode::Train(&mut rng), &mut grads)
                    .map_err(|err| err.at(epoch, step + 1))?;
            }
            if !batch_loss.is_finite() {
                return Err(EncoderError::NonFinite { context: "loss".into() }.at(epoch, step + 1));
            }
            adam.update(&mut params, &grads, profile.learning_rate);
            if !params.all_finite() {
                return Err(EncoderError::NonFinite { context: "parameters after update".into() }.at(epoch, step + 1));
            }
        }
        let (train_loss, train_acc) = evaluate(&train_set, &params, config)?.expect("train set is non-empty");
        let val = evaluate(&val_set, &params, config)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss: val.map(|v| v.0),
            val_acc: val.map(|v| v.1),
        });
    }
    Ok((params, history))
}

/// Eval-mode class probabilities and their argmax (ties to the lowest code).
pub fn predict(document: &Document, params: &EncoderParams, vocab: &TokenVocab, config: &EncoderConfig) -> Result<(SentimentLabel, [f64; 3]), EncoderError> {
    let (ids, mask) = format_input(&document.tokens, vocab, config.max_sequence_length);
    let f = forward(&ids, &mask, params, config, Mode::Eval)?;
    let probs = softmax(&f.logits);
    Ok((SentimentLabel::argmax(&probs), probs))
}
