use serde::{Deserialize, Serialize};

use super::EncoderError;

/// Shape hyperparameters of the transformer classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_size: usize,
    pub feedforward_size: usize,
    pub max_sequence_length: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
}

impl EncoderConfig {
    /// Small architecture that trains in seconds on a laptop CPU.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            num_layers: 2,
            num_heads: 4,
            hidden_size: 64,
            feedforward_size: 128,
            max_sequence_length: 64,
            vocab_size,
            dropout_rate: 0.1,
            num_classes: 3,
        }
    }

    /// BERT-base shape: 12 layers, 12 heads, hidden size 768.
    pub fn paper(vocab_size: usize) -> Self {
        EncoderConfig {
            num_layers: 12,
            num_heads: 12,
            hidden_size: 768,
            feedforward_size: 3072,
            max_sequence_length: 512,
            vocab_size,
            dropout_rate: 0.1,
            num_classes: 3,
        }
    }

    pub fn head_size(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |what: &str| Err(EncoderError::InvalidConfig(what.to_string()));
        if self.num_layers == 0 || self.num_heads == 0 || self.hidden_size == 0 || self.feedforward_size == 0 {
            return bad("all sizes must be at least 1");
        }
        if !self.hidden_size.is_multiple_of(self.num_heads) {
            return bad("hidden_size must be divisible by num_heads");
        }
        if self.max_sequence_length < 3 {
            return bad("max_sequence_length must leave room for [CLS] and [SEP]");
        }
        if self.vocab_size < 4 {
            return bad("vocab_size must cover the 4 reserved tokens");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.num_classes != 3 {
            return bad("num_classes must be 3");
        }
        Ok(())
    }
}

/// Optimizer and schedule settings for [`fine_tune`](super::fine_tune).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainProfile {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl TrainProfile {
    /// Fine-tuning settings for a pretrained checkpoint.
    pub fn paper() -> Self {
        TrainProfile {
            batch_size: 32,
            epochs: 10,
            learning_rate: 3e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }

    /// Same schedule with a step size large enough to learn from random init.
    pub fn desk() -> Self {
        TrainProfile {
            learning_rate: 1e-3,
            ..Self::paper()
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    /// `learning_rate == 0` is accepted so that a frozen run can be checked.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |what: &str| Err(EncoderError::InvalidProfile(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_round_trips_through_toml() {
        let text = toml::to_string(&TrainProfile::paper()).unwrap();
        let back: TrainProfile = toml::from_str(&text).unwrap();
        assert_eq!(back, TrainProfile::paper());
        assert_eq!((back.batch_size, back.epochs, back.learning_rate), (32, 10, 3e-6));
        assert!(text.contains("batch_size = 32\nepochs = 10\nlearning_rate = 0.000003\n"), "{text}");
    }

    #[test]
    fn desk_differs_only_in_learning_rate() {
        let desk = TrainProfile::desk();
        assert_eq!(desk.learning_rate, 1e-3);
        assert_eq!(TrainProfile { learning_rate: 3e-6, ..desk }, TrainProfile::paper());
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::desk(10).validate().is_ok());
        assert!(EncoderConfig::paper(30000).validate().is_ok());
        assert_eq!(EncoderConfig::paper(5).head_size(), 64);
        for broken in [
            EncoderConfig { num_heads: 3, ..EncoderConfig::desk(10) },
            EncoderConfig { num_layers: 0, ..EncoderConfig::desk(10) },
            EncoderConfig { dropout_rate: 1.0, ..EncoderConfig::desk(10) },
            EncoderConfig { max_sequence_length: 2, ..EncoderConfig::desk(10) },
            EncoderConfig::desk(3),
        ] {
            assert!(broken.validate().is_err(), "{broken:?}");
        }
        assert!(TrainProfile { batch_size: 0, ..TrainProfile::desk() }.validate().is_err());
        assert!(TrainProfile { epochs: 0, ..TrainProfile::desk() }.validate().is_err());
        assert!(TrainProfile { learning_rate: f64::NAN, ..TrainProfile::desk() }.validate().is_err());
    }
}
