use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EncoderConfig, EncoderError, EncoderParams, LayerParams};

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Dropout is applied only in `Train` mode, drawing from the given RNG.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub logits: [f64; 3],
    /// Final hidden state at position 0, before dropout.
    pub cls_vector: Array1<f64>,
}

/// Exp-normalize with max subtraction.
pub fn softmax(logits: &[f64; 3]) -> [f64; 3] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - max).exp());
    let sum: f64 = e.iter().sum();
    e.map(|x| x / sum)
}

/// Row softmax in place. Entries equal to `-inf` get weight exactly 0; a
/// row with no finite entry becomes all zeros.
fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            row.fill(0.0);
            continue;
        }
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
}

pub struct NormCache {
    pub normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

/// Per-row standardization with population variance, before gain and bias.
pub fn normalize_rows(x: &Array2<f64>) -> NormCache {
    let d = x.ncols() as f64;
    let mut normalized = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.mapv_inplace(|v| v * *s);
    }
    NormCache { normalized, inv_std }
}

pub fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> Array2<f64> {
    normalize_rows(x).normalized * gain + bias
}

fn layer_norm_backward(dy: &Array2<f64>, cache: &NormCache, gain: &Array1<f64>, dgain: &mut Array1<f64>, dbias: &mut Array1<f64>) -> Array2<f64> {
    let xhat = &cache.normalized;
    *dgain += &(dy * xhat).sum_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0));
    let mut dx = dy * gain;
    let d = dx.ncols() as f64;
    for ((mut row, xrow), &s) in dx.rows_mut().into_iter().zip(xhat.rows()).zip(&cache.inv_std) {
        let m1 = row.sum() / d;
        let m2 = row.iter().zip(xrow).map(|(a, b)| a * b).sum::<f64>() / d;
        Zip::from(&mut row).and(&xrow).for_each(|g, &xh| *g = s * (*g - m1 - xh * m2));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Inverted dropout mask: 0 with probability `rate`, else `1 / (1 - rate)`.
fn dropout_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rate: f64) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

struct LayerTrace {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    attention_dropout: Option<Array2<f64>>,
    norm1: NormCache,
    hidden1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_dropout: Option<Array2<f64>>,
    norm2: NormCache,
}

pub(crate) struct Trace {
    ids: Vec<usize>,
    embedding_dropout: Option<Array2<f64>>,
    layers: Vec<LayerTrace>,
    cls_dropout: Option<Array1<f64>>,
    cls_input: Array1<f64>,
    pub(crate) forward: Forward,
}

fn check_finite(a: &Array2<f64>, context: impl FnOnce() -> String) -> Result<(), EncoderError> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EncoderError::NonFinite { context: context() })
    }
}

/// Number of leading positions that can influence position 0: everything
/// up to the last unmasked slot. Trailing padding is dropped before any
/// arithmetic, so extra padding leaves the result bit-for-bit unchanged.
fn effective_length(mask: &[u8]) -> usize {
    mask.iter().rposition(|&m| m != 0).map_or(1, |i| i + 1)
}

fn validate_input(ids: &[usize], mask: &[u8], config: &EncoderConfig) -> Result<(), EncoderError> {
    if ids.len() != mask.len() {
        return Err(EncoderError::Shape(format!("{} ids but {} mask entries", ids.len(), mask.len())));
    }
    if ids.is_empty() || ids.len() > config.max_sequence_length {
        return Err(EncoderError::Shape(format!("sequence length {} outside 1..={}", ids.len(), config.max_sequence_length)));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= config.vocab_size) {
        return Err(EncoderError::Shape(format!("token id {bad} outside vocabulary of {}", config.vocab_size)));
    }
    Ok(())
}

/// `(q, k, v, per-head attention weights, concatenated context)`.
type AttentionParts = (Array2<f64>, Array2<f64>, Array2<f64>, Vec<Array2<f64>>, Array2<f64>);

fn attention_layer(x: &Array2<f64>, key_bias: &Array1<f64>, l: &LayerParams, heads: usize) -> AttentionParts {
    let q = x.dot(&l.query);
    let k = x.dot(&l.key);
    let v = x.dot(&l.value);
    let dh = q.ncols() / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut context = Array2::zeros(q.raw_dim());
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale + key_bias;
        softmax_rows(&mut scores);
        context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    (q, k, v, probs, context)
}

pub(crate) fn forward_trace(ids: &[usize], mask: &[u8], params: &EncoderParams, config: &EncoderConfig, mode: Mode<'_>) -> Result<Trace, EncoderError> {
    validate_input(ids, mask, config)?;
    let n = effective_length(mask);
    let ids = ids[..n].to_vec();
    let key_bias: Array1<f64> = mask[..n].iter().map(|&m| if m != 0 { 0.0 } else { f64::NEG_INFINITY }).collect();
    let mut rng = match mode {
        Mode::Eval => None,
        Mode::Train(r) if config.dropout_rate > 0.0 => Some(r),
        Mode::Train(_) => None,
    };
    let rate = config.dropout_rate;
    let d = config.hidden_size;
    let mut dropout = |rows: usize| rng.as_deref_mut().map(|r| dropout_mask(r, rows, d, rate));

    let mut x = Array2::from_shape_fn((n, d), |(i, j)| params.token_embeddings[[ids[i], j]] + params.position_embeddings[[i, j]]);
    let embedding_dropout = dropout(n);
    if let Some(m) = &embedding_dropout {
        x *= m;
    }
    check_finite(&x, || "embeddings".into())?;

    let mut layers = Vec::with_capacity(params.layers.len());
    for (li, l) in params.layers.iter().enumerate() {
        let (q, k, v, probs, context) = attention_layer(&x, &key_bias, l, config.num_heads);
        let mut attn = context.dot(&l.output);
        let attention_dropout = dropout(n);
        if let Some(m) = &attention_dropout {
            attn *= m;
        }
        let norm1 = normalize_rows(&(&x + &attn));
        let hidden1 = &norm1.normalized * &l.attention_norm_gain + &l.attention_norm_bias;
        let ff_pre = hidden1.dot(&l.feedforward_in);
        let ff_act = ff_pre.mapv(gelu);
        let mut ff_out = ff_act.dot(&l.feedforward_out);
        let ff_dropout = dropout(n);
        if let Some(m) = &ff_dropout {
            ff_out *= m;
        }
        let norm2 = normalize_rows(&(&hidden1 + &ff_out));
        let out = &norm2.normalized * &l.output_norm_gain + &l.output_norm_bias;
        check_finite(&out, || format!("layer {li}"))?;
        layers.push(LayerTrace { input: x, q, k, v, probs, context, attention_dropout, norm1, hidden1, ff_pre, ff_act, ff_dropout, norm2 });
        x = out;
    }

    let cls_vector = x.row(0).to_owned();
    let cls_dropout = dropout(1).map(|m| m.row(0).to_owned());
    let cls_input = match &cls_dropout {
        Some(m) => &cls_vector * m,
        None => cls_vector.clone(),
    };
    let z = cls_input.dot(&params.classifier_weight) + &params.classifier_bias;
    let logits = [z[0], z[1], z[2]];
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::NonFinite { context: "classifier head".into() });
    }
    Ok(Trace {
        ids,
        embedding_dropout,
        layers,
        cls_dropout,
        cls_input,
        forward: Forward { logits, cls_vector },
    })
}

pub fn forward(ids: &[usize], mask: &[u8], params: &EncoderParams, config: &EncoderConfig, mode: Mode<'_>) -> Result<Forward, EncoderError> {
    forward_trace(ids, mask, params, config, mode).map(|t| t.forward)
}

/// Eval-mode attention probabilities, indexed `[layer][head]`, each of
/// shape `len x len` where `len` excludes trailing padding.
pub fn attention_weights(ids: &[usize], mask: &[u8], params: &EncoderParams, config: &EncoderConfig) -> Result<Vec<Vec<Array2<f64>>>, EncoderError> {
    let trace = forward_trace(ids, mask, params, config, Mode::Eval)?;
    Ok(trace.layers.into_iter().map(|l| l.probs).collect())
}

/// Accumulates `d loss / d params` into `grads` given `d loss / d logits`.
pub(crate) fn backward(trace: &Trace, dlogits: &[f64; 3], params: &EncoderParams, config: &EncoderConfig, grads: &mut EncoderParams) {
    let dz = Array1::from(dlogits.to_vec());
    let outer = |a: &Array1<f64>, b: &Array1<f64>| {
        a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)))
    };
    grads.classifier_weight += &outer(&trace.cls_input, &dz);
    grads.classifier_bias += &dz;
    let mut dcls = params.classifier_weight.dot(&dz);
    if let Some(m) = &trace.cls_dropout {
        dcls *= m;
    }
    let n = trace.ids.len();
    let mut dx = Array2::zeros((n, config.hidden_size));
    dx.row_mut(0).assign(&dcls);

    let heads = config.num_heads;
    let dh = config.head_size();
    let scale = 1.0 / (dh as f64).sqrt();
    for ((lt, l), g) in trace.layers.iter().zip(&params.layers).zip(grads.layers.iter_mut()).rev() {
        let dr2 = layer_norm_backward(&dx, &lt.norm2, &l.output_norm_gain, &mut g.output_norm_gain, &mut g.output_norm_bias);
        let mut dff_out = dr2.clone();
        if let Some(m) = &lt.ff_dropout {
            dff_out *= m;
        }
        g.feedforward_out += &lt.ff_act.t().dot(&dff_out);
        let mut dpre = dff_out.dot(&l.feedforward_out.t());
        Zip::from(&mut dpre).and(&lt.ff_pre).for_each(|g, &x| *g *= gelu_grad(x));
        g.feedforward_in += &lt.hidden1.t().dot(&dpre);
        let dh1 = dr2 + dpre.dot(&l.feedforward_in.t());

        let dr1 = layer_norm_backward(&dh1, &lt.norm1, &l.attention_norm_gain, &mut g.attention_norm_gain, &mut g.attention_norm_bias);
        let mut dattn = dr1.clone();
        if let Some(m) = &lt.attention_dropout {
            dattn *= m;
        }
        g.output += &lt.context.t().dot(&dattn);
        let dctx = dattn.dot(&l.output.t());
        let mut dq = Array2::zeros(lt.q.raw_dim());
        let mut dk = Array2::zeros(lt.k.raw_dim());
        let mut dv = Array2::zeros(lt.v.raw_dim());
        for (h, p) in lt.probs.iter().enumerate().take(heads) {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dctx_h = dctx.slice(cols);
            let dp = dctx_h.dot(&lt.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));
            let mut ds = dp;
            for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                let dot: f64 = row.iter().zip(prow).map(|(a, b)| a * b).sum();
                Zip::from(&mut row).and(&prow).for_each(|g, &pv| *g = pv * (*g - dot) * scale);
            }
            dq.slice_mut(cols).assign(&ds.dot(&lt.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&lt.q.slice(cols)));
        }
        g.query += &lt.input.t().dot(&dq);
        g.key += &lt.input.t().dot(&dk);
        g.value += &lt.input.t().dot(&dv);
        dx = dr1 + dq.dot(&l.query.t()) + dk.dot(&l.key.t()) + dv.dot(&l.value.t());
    }

    if let Some(m) = &trace.embedding_dropout {
        dx *= m;
    }
    for (i, &id) in trace.ids.iter().enumerate() {
        let row = dx.row(i);
        let mut t = grads.token_embeddings.row_mut(id);
        t += &row;
        let mut p = grads.position_embeddings.row_mut(i);
        p += &row;
    }
}

/// Cross-entropy `-log softmax(logits)[label]` computed stably.
pub fn cross_entropy(logits: &[f64; 3], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Loss of one example and its gradient with respect to every parameter.
pub fn loss_and_gradient(ids: &[usize], mask: &[u8], label: usize, params: &EncoderParams, config: &EncoderConfig, mode: Mode<'_>) -> Result<(f64, EncoderParams), EncoderError> {
    let mut grads = params.zeros_like();
    let loss = accumulate_gradient(ids, mask, label, 1.0, params, config, mode, &mut grads)?;
    Ok((loss, grads))
}

/// Adds `weight * d loss / d params` into `grads` and returns the loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate_gradient(ids: &[usize], mask: &[u8], label: usize, weight: f64, params: &EncoderParams, config: &EncoderConfig, mode: Mode<'_>, grads: &mut EncoderParams) -> Result<f64, EncoderError> {
    let trace = forward_trace(ids, mask, params, config, mode)?;
    let logits = trace.forward.logits;
    let mut dlogits = softmax(&logits);
    dlogits[label] -= 1.0;
    let dlogits = dlogits.map(|g| g * weight);
    backward(&trace, &dlogits, params, config, grads);
    Ok(cross_entropy(&logits, label))
}
