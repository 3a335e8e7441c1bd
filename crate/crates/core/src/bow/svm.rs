use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{labels_of, vectorize, BowError, BowVocab, FeatureMode, SparseVector};
use crate::label::SentimentLabel;
use crate::preprocess::Document;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub feature_mode: FeatureMode,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-3,
            epochs: 20,
            seed: 0,
            feature_mode: FeatureMode::Tfidf,
        }
    }
}

/// One-vs-rest linear SVM: one weight row and bias per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: [f64; 3],
    pub regularization_lambda: f64,
    pub feature_mode: FeatureMode,
    /// `lambda / 2 * |(w, b)|^2 + mean hinge` per class after training.
    pub final_objective: [f64; 3],
}

impl SvmModel {
    pub fn weight_norm(&self, class: SentimentLabel) -> f64 {
        self.weights[class.code()].iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// A trained binary separator `sign(w . x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

/// Regularized hinge objective. The bias is treated as the weight of a
/// constant feature and is regularized with the rest.
fn objective(xs: &[SparseVector], ys: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - y * (x.dot(w) + b)).max(0.0))
        .sum();
    reg + hinge / xs.len() as f64
}

/// Pegasos stochastic subgradient descent on the hinge loss.
///
/// Each epoch visits the examples in a fresh seeded permutation. Step `t`
/// (counted from 1 across epochs) uses learning rate `1 / (lambda * t)`,
/// then projects `(w, b)` onto the ball of radius `1 / sqrt(lambda)`.
/// The returned separator is the mean iterate over the last
/// `epochs - epochs / 2` epochs; suffix averaging removes the oscillation
/// of the final iterate around the optimum. `ys` holds +1/-1 targets.
pub fn pegasos_binary(xs: &[SparseVector], ys: &[f64], dim: usize, lambda: f64, epochs: usize, rng: &mut ChaCha8Rng) -> BinarySvm {
    if epochs == 0 || xs.is_empty() {
        let weights = vec![0.0; dim];
        return BinarySvm {
            objective: objective(xs, ys, &weights, 0.0, lambda),
            weights,
            bias: 0.0,
        };
    }
    let mut iterate = ScaledIterate::new(dim);
    let mut b = 0.0;
    let radius = 1.0 / lambda.sqrt();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let tail_start = epochs / 2;
    let mut sum_b = 0.0;
    let mut t = 0usize;
    for epoch in 0..epochs {
        let averaging = epoch >= tail_start;
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = (&xs[i], ys[i]);
            let margin = y * (iterate.dot(x) + b);
            // At t = 1 the factor is 0 and the old iterate is wiped out.
            let shrink = 1.0 - eta * lambda;
            iterate.rescale(shrink);
            b *= shrink;
            if margin < 1.0 {
                iterate.add(x, eta * y);
                b += eta * y;
            }
            let norm = (iterate.sq_norm + b * b).max(0.0).sqrt();
            if norm > radius {
                iterate.rescale(radius / norm);
                b *= radius / norm;
            }
            if averaging {
                iterate.accumulate();
                sum_b += b;
            }
        }
    }
    let steps = ((epochs - tail_start) * xs.len()) as f64;
    let weights: Vec<f64> = iterate.into_sum().into_iter().map(|s| s / steps).collect();
    let bias = sum_b / steps;
    BinarySvm {
        objective: objective(xs, ys, &weights, bias, lambda),
        weights,
        bias,
    }
}

/// Weight vector stored as `scale * v` so that shrinking costs O(1), with
/// a lazily maintained running sum of the true iterate.
///
/// Invariant: the sum of true iterates over all accumulated steps is
/// `sum[j] + v[j] * (cum - mark[j])`, where `cum` totals `scale` over
/// accumulated steps since the last full flush.
struct ScaledIterate {
    v: Vec<f64>,
    scale: f64,
    /// Squared norm of `scale * v`.
    sq_norm: f64,
    sum: Vec<f64>,
    mark: Vec<f64>,
    cum: f64,
}

impl ScaledIterate {
    fn new(dim: usize) -> Self {
        ScaledIterate {
            v: vec![0.0; dim],
            scale: 1.0,
            sq_norm: 0.0,
            sum: vec![0.0; dim],
            mark: vec![0.0; dim],
            cum: 0.0,
        }
    }

    fn dot(&self, x: &SparseVector) -> f64 {
        self.scale * x.dot(&self.v)
    }

    fn flush(&mut self, j: usize) {
        self.sum[j] += self.v[j] * (self.cum - self.mark[j]);
        self.mark[j] = self.cum;
    }

    /// Settles every coordinate and folds `scale` into `v`.
    fn flush_all(&mut self) {
        for j in 0..self.v.len() {
            self.flush(j);
            self.v[j] *= self.scale;
            self.mark[j] = 0.0;
        }
        self.scale = 1.0;
        self.cum = 0.0;
    }

    fn rescale(&mut self, k: f64) {
        if k == 0.0 {
            self.flush_all();
            self.v.iter_mut().for_each(|v| *v = 0.0);
            self.sq_norm = 0.0;
            return;
        }
        self.scale *= k;
        self.sq_norm *= k * k;
        // Bounding the range of `scale` between flushes bounds the
        // cancellation in `cum - mark`.
        if self.scale < 1e-3 {
            self.flush_all();
        }
    }

    fn add(&mut self, x: &SparseVector, step: f64) {
        for &(j, xj) in &x.entries {
            self.flush(j);
            let old = self.scale * self.v[j];
            let new = old + step * xj;
            self.sq_norm += new * new - old * old;
            self.v[j] = new / self.scale;
        }
    }

    /// Adds the current true iterate to the running sum.
    fn accumulate(&mut self) {
        self.cum += self.scale;
    }

    fn into_sum(mut self) -> Vec<f64> {
        self.flush_all();
        self.sum
    }
}

/// Trains three one-vs-rest Pegasos classifiers. Class `c` uses the RNG
/// stream seeded with `seed + c`, so the result does not depend on the
/// order in which the classes are trained.
pub fn svm_train(train: &[Document], vocab: &BowVocab, config: &SvmConfig) -> Result<SvmModel, BowError> {
    if train.is_empty() {
        return Err(BowError::EmptyTraining);
    }
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(BowError::BadHyperparameter {
            name: "lambda",
            value: config.lambda,
        });
    }
    let labels = labels_of(train)?;
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(BowError::SingleClass);
    }
    let xs: Vec<SparseVector> = train
        .iter()
        .map(|d| vectorize(&d.tokens, vocab, config.feature_mode))
        .collect();
    let mut weights = Vec::with_capacity(3);
    let mut biases = [0.0; 3];
    let mut final_objective = [0.0; 3];
    for class in SentimentLabel::ALL {
        let ys: Vec<f64> = labels.iter().map(|l| if *l == class { 1.0 } else { -1.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(class.code() as u64));
        let model = pegasos_binary(&xs, &ys, vocab.len(), config.lambda, config.epochs, &mut rng);
        biases[class.code()] = model.bias;
        final_objective[class.code()] = model.objective;
        weights.push(model.weights);
    }
    Ok(SvmModel {
        weights,
        biases,
        regularization_lambda: config.lambda,
        feature_mode: config.feature_mode,
        final_objective,
    })
}

/// Argmax of `w_c . x + b_c` with ties to the lowest label code.
pub fn svm_predict(document: &Document, model: &SvmModel, vocab: &BowVocab) -> (SentimentLabel, [f64; 3]) {
    let x = vectorize(&document.tokens, vocab, model.feature_mode);
    let margins = margins(&x, model);
    (SentimentLabel::argmax(&margins), margins)
}

pub(crate) fn margins(x: &SparseVector, model: &SvmModel) -> [f64; 3] {
    std::array::from_fn(|c| x.dot(&model.weights[c]) + model.biases[c])
}
