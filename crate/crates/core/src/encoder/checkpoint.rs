//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic "SENTENC\0" | version u32
//! num_layers num_heads hidden_size feedforward_size max_sequence_length vocab_size num_classes: u32 x 7
//! dropout_rate f64
//! tensor_count u32
//! per tensor: name_len u32, name utf8, ndim u32, dims u32 x ndim, values f32 x prod(dims)
//! ```
//!
//! Values are stored as f32, so a reload is exact only up to f32 rounding.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{EncoderConfig, EncoderError, EncoderParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SENTENC\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<(), EncoderError> {
    let v = u32::try_from(v).map_err(|_| EncoderError::Checkpoint(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut writer: W, config: &EncoderConfig, params: &EncoderParams) -> Result<(), EncoderError> {
    if !params.matches(config) {
        return Err(EncoderError::Shape("parameters do not match the configuration".into()));
    }
    let w = &mut writer;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for v in [config.num_layers, config.num_heads, config.hidden_size, config.feedforward_size, config.max_sequence_length, config.vocab_size, config.num_classes] {
        put_u32(w, v)?;
    }
    w.write_all(&config.dropout_rate.to_le_bytes())?;
    let tensors = params.tensors();
    put_u32(w, tensors.len())?;
    for t in tensors {
        put_u32(w, t.name.len())?;
        w.write_all(t.name.as_bytes())?;
        put_u32(w, t.shape.len())?;
        for &d in &t.shape {
            put_u32(w, d)?;
        }
        let mut buf = Vec::with_capacity(t.data.len() * 4);
        for &x in t.data {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], EncoderError> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| EncoderError::Checkpoint(format!("truncated file: {e}")))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<usize, EncoderError> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn vec(&mut self, len: usize) -> Result<Vec<u8>, EncoderError> {
        let mut b = Vec::new();
        let got = (&mut self.inner).take(len as u64).read_to_end(&mut b)?;
        if got != len {
            return Err(EncoderError::Checkpoint("truncated file".into()));
        }
        Ok(b)
    }
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<(EncoderConfig, EncoderParams), EncoderError> {
    let mut r = Reader { inner: reader };
    if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(EncoderError::Checkpoint("not an encoder checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(EncoderError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32()?;
    }
    let config = EncoderConfig {
        num_layers: dims[0],
        num_heads: dims[1],
        hidden_size: dims[2],
        feedforward_size: dims[3],
        max_sequence_length: dims[4],
        vocab_size: dims[5],
        num_classes: dims[6],
        dropout_rate: f64::from_le_bytes(r.bytes()?),
    };
    config.validate()?;

    let mut stored: BTreeMap<String, (Vec<usize>, Vec<u8>)> = BTreeMap::new();
    for _ in 0..r.u32()? {
        let name_len = r.u32()?;
        let name = String::from_utf8(r.vec(name_len)?).map_err(|_| EncoderError::Checkpoint("tensor name is not utf-8".into()))?;
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| EncoderError::Checkpoint(format!("tensor {name} is too large")))?;
        let data = r.vec(count * 4)?;
        if stored.insert(name.clone(), (shape, data)).is_some() {
            return Err(EncoderError::Checkpoint(format!("duplicate tensor {name}")));
        }
    }

    let mut params = EncoderParams::zeros_for(&config);
    for t in params.tensors_mut() {
        let (shape, data) = stored.remove(&t.name).ok_or_else(|| EncoderError::Checkpoint(format!("missing tensor {}", t.name)))?;
        if shape != t.shape {
            return Err(EncoderError::Checkpoint(format!("tensor {} has shape {shape:?}, expected {:?}", t.name, t.shape)));
        }
        for (dst, chunk) in t.data.iter_mut().zip(data.chunks_exact(4)) {
            *dst = f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
        }
    }
    if let Some(extra) = stored.keys().next() {
        return Err(EncoderError::Checkpoint(format!("unexpected tensor {extra}")));
    }
    if !params.all_finite() {
        return Err(EncoderError::NonFinite { context: "checkpoint".into() });
    }
    Ok((config, params))
}
