//! JSON container for the bag-of-words models.
//!
//! ```json
//! {"magic": "sentiment-bow-model", "version": 1, "kind": "mnb" | "svm",
//!  "vocab": {...}, "model": {...}}
//! ```

use std::io;

use serde::{Deserialize, Serialize};

use super::{BowVocab, MnbModel, SvmModel};

pub const MODEL_MAGIC: &str = "sentiment-bow-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}")]
    BadMagic(String),
    #[error("unsupported model file version {0}")]
    BadVersion(u32),
    #[error("weights have {got} columns but the vocabulary has {expected} tokens")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum BowModel {
    Mnb(MnbModel),
    Svm(SvmModel),
}

#[derive(Serialize, Deserialize)]
struct Container {
    magic: String,
    version: u32,
    vocab: BowVocab,
    #[serde(flatten)]
    model: BowModel,
}

pub fn write_model<W: io::Write>(mut writer: W, vocab: &BowVocab, model: &BowModel) -> Result<(), ModelFileError> {
    let c = Container {
        magic: MODEL_MAGIC.to_string(),
        version: MODEL_VERSION,
        vocab: vocab.clone(),
        model: model.clone(),
    };
    serde_json::to_writer(&mut writer, &c)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_model<R: io::Read>(reader: R) -> Result<(BowVocab, BowModel), ModelFileError> {
    let c: Container = serde_json::from_reader(reader)?;
    if c.magic != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic(c.magic));
    }
    if c.version != MODEL_VERSION {
        return Err(ModelFileError::BadVersion(c.version));
    }
    let rows = match &c.model {
        BowModel::Mnb(m) => &m.token_log_likelihood,
        BowModel::Svm(m) => &m.weights,
    };
    if let Some(bad) = rows.iter().find(|r| r.len() != c.vocab.len()) {
        return Err(ModelFileError::ShapeMismatch {
            expected: c.vocab.len(),
            got: bad.len(),
        });
    }
    Ok((c.vocab, c.model))
}

#[cfg(test)]
mod tests {
    use super::super::{build_vocab, mnb_train, svm_train, SvmConfig};
    use super::*;
    use crate::label::SentimentLabel::*;
    use crate::preprocess::Document;

    fn corpus() -> Vec<Document> {
        vec![
            Document::from_tokens("1", &["rugi", "ppkm"]).with_label(Negative),
            Document::from_tokens("2", &["info"]).with_label(Neutral),
            Document::from_tokens("3", &["senang"]).with_label(Positive),
        ]
    }

    #[test]
    fn round_trips_exactly() {
        let docs = corpus();
        let vocab = build_vocab(&docs, 1).unwrap();
        for model in [
            BowModel::Mnb(mnb_train(&docs, &vocab, 1.0).unwrap()),
            BowModel::Svm(svm_train(&docs, &vocab, &SvmConfig::default()).unwrap()),
        ] {
            let mut buf = Vec::new();
            write_model(&mut buf, &vocab, &model).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("{\"magic\":\"sentiment-bow-model\",\"version\":1"));
            let (v, m) = read_model(buf.as_slice()).unwrap();
            assert_eq!(v, vocab);
            assert_eq!(m, model);
        }
    }

    #[test]
    fn rejects_foreign_files() {
        let bad = r#"{"magic":"nope","version":1,"vocab":{"tokens":[],"counts":[],"document_frequency":[],"num_documents":0},"kind":"mnb","model":{"class_log_prior":[0,0,0],"token_log_likelihood":[[],[],[]],"smoothing_alpha":1}}"#;
        assert!(matches!(read_model(bad.as_bytes()), Err(ModelFileError::BadMagic(_))));
        let v2 = bad.replace("\"nope\"", "\"sentiment-bow-model\"").replace("\"version\":1", "\"version\":2");
        assert!(matches!(read_model(v2.as_bytes()), Err(ModelFileError::BadVersion(2))));
        let shape = bad.replace("\"nope\"", "\"sentiment-bow-model\"").replace("[[],[],[]]", "[[1],[],[]]");
        assert!(matches!(read_model(shape.as_bytes()), Err(ModelFileError::ShapeMismatch { .. })));
    }
}
