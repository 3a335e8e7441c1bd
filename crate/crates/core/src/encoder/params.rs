use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EncoderConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub query: Array2<f64>,
    pub key: Array2<f64>,
    pub value: Array2<f64>,
    pub output: Array2<f64>,
    pub attention_norm_gain: Array1<f64>,
    pub attention_norm_bias: Array1<f64>,
    pub feedforward_in: Array2<f64>,
    pub feedforward_out: Array2<f64>,
    pub output_norm_gain: Array1<f64>,
    pub output_norm_bias: Array1<f64>,
}

/// Every trainable weight of the classifier. Matrices multiply row vectors
/// from the right (`x W`), so a projection from `D` to `F` is `D x F`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub token_embeddings: Array2<f64>,
    pub position_embeddings: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub classifier_weight: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

/// Borrowed view of one named tensor in canonical order.
pub struct Tensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn((rows, cols), || loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * std {
            break x;
        }
    })
}

macro_rules! layer_fields {
    ($m:ident, $layer:expr, $i:expr, $out:ident, $view:ident) => {{
        let l = $layer;
        for (suffix, t) in [
            ("attention.query", l.query.$view()),
            ("attention.key", l.key.$view()),
            ("attention.value", l.value.$view()),
            ("attention.output", l.output.$view()),
        ] {
            $out.push($m(format!("layer.{}.{suffix}", $i), t));
        }
        $out.push($m(format!("layer.{}.attention_norm.gain", $i), l.attention_norm_gain.$view()));
        $out.push($m(format!("layer.{}.attention_norm.bias", $i), l.attention_norm_bias.$view()));
        $out.push($m(format!("layer.{}.feedforward.in", $i), l.feedforward_in.$view()));
        $out.push($m(format!("layer.{}.feedforward.out", $i), l.feedforward_out.$view()));
        $out.push($m(format!("layer.{}.output_norm.gain", $i), l.output_norm_gain.$view()));
        $out.push($m(format!("layer.{}.output_norm.bias", $i), l.output_norm_bias.$view()));
    }};
}

impl EncoderParams {
    /// Truncated normal (two standard deviations) weights, unit layer-norm
    /// gains, zero biases.
    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, std: f64, rng: &mut R) -> Self {
        let (d, f) = (config.hidden_size, config.feedforward_size);
        let token_embeddings = truncated_normal(rng, config.vocab_size, d, std);
        let position_embeddings = truncated_normal(rng, config.max_sequence_length, d, std);
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                query: truncated_normal(rng, d, d, std),
                key: truncated_normal(rng, d, d, std),
                value: truncated_normal(rng, d, d, std),
                output: truncated_normal(rng, d, d, std),
                attention_norm_gain: Array1::ones(d),
                attention_norm_bias: Array1::zeros(d),
                feedforward_in: truncated_normal(rng, d, f, std),
                feedforward_out: truncated_normal(rng, f, d, std),
                output_norm_gain: Array1::ones(d),
                output_norm_bias: Array1::zeros(d),
            })
            .collect();
        let classifier_weight = truncated_normal(rng, d, config.num_classes, std);
        EncoderParams {
            token_embeddings,
            position_embeddings,
            layers,
            classifier_weight,
            classifier_bias: Array1::zeros(config.num_classes),
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.fill(0.0);
        }
        z
    }

    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        fn make<D: ndarray::Dimension>(name: String, a: ndarray::ArrayView<'_, f64, D>) -> Tensor<'_> {
            Tensor {
                name,
                shape: a.shape().to_vec(),
                data: a.to_slice().expect("standard layout"),
            }
        }
        let mut out = vec![
            make("embeddings.token".into(), self.token_embeddings.view()),
            make("embeddings.position".into(), self.position_embeddings.view()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            layer_fields!(make, l, i, out, view);
        }
        out.push(make("classifier.weight".into(), self.classifier_weight.view()));
        out.push(make("classifier.bias".into(), self.classifier_bias.view()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        fn make<D: ndarray::Dimension>(name: String, a: ndarray::ArrayViewMut<'_, f64, D>) -> TensorMut<'_> {
            let shape = a.shape().to_vec();
            TensorMut {
                name,
                shape,
                data: a.into_slice().expect("standard layout"),
            }
        }
        let mut out = vec![
            make("embeddings.token".into(), self.token_embeddings.view_mut()),
            make("embeddings.position".into(), self.position_embeddings.view_mut()),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            layer_fields!(make, l, i, out, view_mut);
        }
        out.push(make("classifier.weight".into(), self.classifier_weight.view_mut()));
        out.push(make("classifier.bias".into(), self.classifier_bias.view_mut()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// True when every tensor has the shape `config` implies.
    pub fn matches(&self, config: &EncoderConfig) -> bool {
        let reference = Self::zeros_for(config);
        let a = self.tensors();
        let b = reference.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.name == y.name && x.shape == y.shape)
    }

    pub(crate) fn zeros_for(config: &EncoderConfig) -> Self {
        let (d, f) = (config.hidden_size, config.feedforward_size);
        let sq = || Array2::zeros((d, d));
        EncoderParams {
            token_embeddings: Array2::zeros((config.vocab_size, d)),
            position_embeddings: Array2::zeros((config.max_sequence_length, d)),
            layers: (0..config.num_layers)
                .map(|_| LayerParams {
                    query: sq(),
                    key: sq(),
                    value: sq(),
                    output: sq(),
                    attention_norm_gain: Array1::zeros(d),
                    attention_norm_bias: Array1::zeros(d),
                    feedforward_in: Array2::zeros((d, f)),
                    feedforward_out: Array2::zeros((f, d)),
                    output_norm_gain: Array1::zeros(d),
                    output_norm_bias: Array1::zeros(d),
                })
                .collect(),
            classifier_weight: Array2::zeros((d, config.num_classes)),
            classifier_bias: Array1::zeros(config.num_classes),
        }
    }
}
