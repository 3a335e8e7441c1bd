//! Pipeline configuration file (TOML). Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sentiment_core::bow::FeatureMode;
use sentiment_core::corpus::{DedupeKey, KeywordMatch, RecordFormat, SplitSpec};
use sentiment_core::encoder::{EncoderConfig, TrainProfile};

use crate::error::{invalid, CliResult};

pub const OUTPUT_DIR_ENV: &str = "SENTIMENT_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub paths: Paths,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub viz: VizSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Raw post files, `.jsonl` or `.csv`.
    pub corpus: Vec<PathBuf>,
    /// Defaults to the bundled Indonesian list.
    pub stopwords: Option<PathBuf>,
    /// Both or neither; defaults to the bundled lexicon.
    pub lexicon_positive: Option<PathBuf>,
    pub lexicon_negative: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    pub keywords: Vec<String>,
    pub keyword_match: KeywordMatch,
    pub dedupe: DedupeKey,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            keywords: vec!["ppkm".into()],
            keyword_match: KeywordMatch::Any,
            dedupe: DedupeKey::NormalizedText,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    /// Relative sizes of train, validation and test.
    pub ratio: [f64; 3],
    pub stratified: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            ratio: [4877.0, 293.0, 145.0],
            stratified: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lexicon,
    Mnb,
    Svm,
    Bert,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lexicon => "lexicon",
            ModelKind::Mnb => "mnb",
            ModelKind::Svm => "svm",
            ModelKind::Bert => "bert",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lexicon" => Ok(ModelKind::Lexicon),
            "mnb" => Ok(ModelKind::Mnb),
            "svm" => Ok(ModelKind::Svm),
            "bert" => Ok(ModelKind::Bert),
            other => Err(format!("unknown model {other:?}; expected lexicon, mnb, svm or bert")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    #[default]
    Desk,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kinds: Vec<ModelKind>,
    /// `paper` or `desk`.
    pub profile: String,
    pub overrides: ProfileOverrides,
    pub architecture: Architecture,
    pub encoder: EncoderOverrides,
    pub mnb: MnbSection,
    pub svm: SvmSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kinds: vec![ModelKind::Mnb, ModelKind::Svm, ModelKind::Bert],
            profile: "desk".into(),
            overrides: ProfileOverrides::default(),
            architecture: Architecture::Desk,
            encoder: EncoderOverrides::default(),
            mnb: MnbSection::default(),
            svm: SvmSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverrides {
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderOverrides {
    pub num_layers: Option<usize>,
    pub num_heads: Option<usize>,
    pub hidden_size: Option<usize>,
    pub feedforward_size: Option<usize>,
    pub max_sequence_length: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub min_count: u64,
}

impl Default for EncoderOverrides {
    fn default() -> Self {
        EncoderOverrides {
            num_layers: None,
            num_heads: None,
            hidden_size: None,
            feedforward_size: None,
            max_sequence_length: None,
            dropout_rate: None,
            min_count: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MnbSection {
    pub alpha: f64,
    pub min_count: u64,
}

impl Default for MnbSection {
    fn default() -> Self {
        MnbSection { alpha: 1.0, min_count: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmSection {
    pub lambda: f64,
    pub epochs: usize,
    pub feature_mode: FeatureMode,
    pub min_count: u64,
}

impl Default for SvmSection {
    fn default() -> Self {
        SvmSection {
            lambda: 1e-3,
            epochs: 20,
            feature_mode: FeatureMode::Tfidf,
            min_count: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VizSection {
    pub top_k: usize,
    pub ngram_orders: Vec<usize>,
    pub extra_stopwords: Vec<String>,
}

impl Default for VizSection {
    fn default() -> Self {
        VizSection {
            top_k: 20,
            ngram_orders: vec![1, 2],
            extra_stopwords: Vec::new(),
        }
    }
}

/// A validated configuration with every path made absolute.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub config_dir: PathBuf,
    pub output_dir: PathBuf,
    pub corpus: Vec<(PathBuf, RecordFormat)>,
    pub stopwords: Option<PathBuf>,
    pub lexicon: Option<(PathBuf, PathBuf)>,
    pub split: SplitSpec,
    pub profile: TrainProfile,
    /// sha256 of the canonical config with the output location removed.
    pub config_hash: String,
}

impl Resolved {
    /// Encoder shape for a vocabulary of `vocab_size` tokens.
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        let m = &self.config.model;
        let base = match m.architecture {
            Architecture::Desk => EncoderConfig::desk(vocab_size),
            Architecture::Paper => EncoderConfig::paper(vocab_size),
        };
        let e = &m.encoder;
        EncoderConfig {
            num_layers: e.num_layers.unwrap_or(base.num_layers),
            num_heads: e.num_heads.unwrap_or(base.num_heads),
            hidden_size: e.hidden_size.unwrap_or(base.hidden_size),
            feedforward_size: e.feedforward_size.unwrap_or(base.feedforward_size),
            max_sequence_length: e.max_sequence_length.unwrap_or(base.max_sequence_length),
            dropout_rate: e.dropout_rate.unwrap_or(base.dropout_rate),
            ..base
        }
    }
}

/// Command-line adjustments applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub kinds: Vec<ModelKind>,
    pub profile: Option<String>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("{what} {} does not exist", path.display())))
    }
}

pub fn load(config_path: &Path, overrides: &Overrides) -> CliResult<Resolved> {
    let text = std::fs::read_to_string(config_path).map_err(|e| invalid(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config: PipelineConfig = toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", config_path.display())))?;
    if !overrides.kinds.is_empty() {
        config.model.kinds = overrides.kinds.clone();
    }
    if let Some(p) = &overrides.profile {
        config.model.profile = p.clone();
    }
    let o = &mut config.model.overrides;
    o.batch_size = overrides.batch_size.or(o.batch_size);
    o.epochs = overrides.epochs.or(o.epochs);
    o.learning_rate = overrides.learning_rate.or(o.learning_rate);

    let config_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config_dir = if config_dir.as_os_str().is_empty() { PathBuf::from(".") } else { config_dir };
    let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => resolve(&config_dir, &config.output_dir),
    };

    if config.paths.corpus.is_empty() {
        return Err(invalid("paths.corpus lists no files"));
    }
    let mut corpus = Vec::new();
    for p in &config.paths.corpus {
        let path = resolve(&config_dir, p);
        require_file(&path, "corpus file")?;
        let format = RecordFormat::from_path(&path).ok_or_else(|| invalid(format!("{}: expected a .jsonl or .csv extension", path.display())))?;
        corpus.push((path, format));
    }
    let stopwords = config.paths.stopwords.as_ref().map(|p| resolve(&config_dir, p));
    if let Some(p) = &stopwords {
        require_file(p, "stopword list")?;
    }
    let lexicon = match (&config.paths.lexicon_positive, &config.paths.lexicon_negative) {
        (Some(pos), Some(neg)) => {
            let (pos, neg) = (resolve(&config_dir, pos), resolve(&config_dir, neg));
            require_file(&pos, "positive lexicon")?;
            require_file(&neg, "negative lexicon")?;
            Some((pos, neg))
        }
        (None, None) => None,
        _ => return Err(invalid("set both paths.lexicon_positive and paths.lexicon_negative, or neither")),
    };
    if config.ingest.keywords.iter().all(|k| k.trim().is_empty()) {
        return Err(invalid("ingest.keywords is empty"));
    }
    let split = SplitSpec::from_ratio(config.split.ratio, config.seed, config.split.stratified).map_err(|e| invalid(format!("split: {e}")))?;

    let m = &config.model;
    if m.kinds.is_empty() {
        return Err(invalid("model.kinds is empty"));
    }
    let mut profile = TrainProfile::named(&m.profile).ok_or_else(|| invalid(format!("model.profile must be \"paper\" or \"desk\", got {:?}", m.profile)))?;
    profile.seed = config.seed;
    let o = &m.overrides;
    profile.batch_size = o.batch_size.unwrap_or(profile.batch_size);
    profile.epochs = o.epochs.unwrap_or(profile.epochs);
    profile.learning_rate = o.learning_rate.unwrap_or(profile.learning_rate);
    profile.seed = o.seed.unwrap_or(profile.seed);
    profile.validate().map_err(|e| invalid(e.to_string()))?;
    if profile.learning_rate == 0.0 {
        return Err(invalid("learning_rate must be positive"));
    }
    if !(m.mnb.alpha > 0.0 && m.mnb.alpha.is_finite()) {
        return Err(invalid("model.mnb.alpha must be positive"));
    }
    if !(m.svm.lambda > 0.0 && m.svm.lambda.is_finite()) || m.svm.epochs == 0 {
        return Err(invalid("model.svm needs lambda > 0 and epochs >= 1"));
    }
    if config.viz.top_k == 0 || config.viz.ngram_orders.contains(&0) {
        return Err(invalid("viz.top_k and every viz.ngram_orders entry must be at least 1"));
    }

    let config_hash = {
        let mut canonical = config.clone();
        canonical.output_dir = PathBuf::new();
        crate::manifest::sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    };
    let resolved = Resolved {
        config,
        config_dir,
        output_dir,
        corpus,
        stopwords,
        lexicon,
        split,
        profile,
        config_hash,
    };
    // Shape checks that do not depend on the vocabulary.
    resolved.encoder_config(4).validate().map_err(|e| invalid(e.to_string()))?;
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const MINIMAL: &str = "output_dir = \"out\"\n[paths]\ncorpus = [\"raw.jsonl\"]\n";

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "raw.jsonl", "");
        let cfg = write(dir.path(), "c.toml", MINIMAL);
        let r = load(&cfg, &Overrides::default()).unwrap();
        assert_eq!(r.corpus[0].0, dir.path().join("raw.jsonl"));
        assert_eq!(r.profile, TrainProfile::desk());
        assert_eq!(r.split.sizes(5315), (4877, 293, 145));
        assert_eq!(r.encoder_config(10), EncoderConfig::desk(10));
        assert_eq!(r.config.model.kinds, [ModelKind::Mnb, ModelKind::Svm, ModelKind::Bert]);
    }

    #[test]
    fn paper_profile_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "raw.jsonl", "");
        let cfg = write(dir.path(), "c.toml", &format!("{MINIMAL}[model]\nprofile = \"paper\"\n[model.overrides]\nepochs = 2\n"));
        let r = load(&cfg, &Overrides::default()).unwrap();
        assert_eq!((r.profile.batch_size, r.profile.epochs, r.profile.learning_rate), (32, 2, 3e-6));
        let r = load(&cfg, &Overrides { epochs: Some(10), ..Default::default() }).unwrap();
        assert_eq!(r.profile, TrainProfile::paper());
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "raw.jsonl", "");
        for (body, needle) in [
            ("output_dir = \"out\"\n[paths]\ncorpus = [\"missing.jsonl\"]\n", "does not exist"),
            (&format!("{MINIMAL}[model]\nprofile = \"fast\"\n") as &str, "model.profile"),
            (&format!("{MINIMAL}[model.overrides]\nbatch_size = \"big\"\n"), "batch_size"),
            (&format!("{MINIMAL}[model.overrides]\nlearning_rate = 0.0\n"), "learning_rate"),
            (&format!("{MINIMAL}[model]\nkinds = [\"gpt\"]\n"), "unknown variant"),
            (&format!("{MINIMAL}[split]\nratio = [1.0, -1.0, 1.0]\n"), "split"),
            (&format!("{MINIMAL}[model.encoder]\nnum_heads = 5\n"), "divisible"),
            (&format!("{MINIMAL}colour = 1\n"), "unknown field"),
            (&format!("{MINIMAL}lexicon_positive = \"p.txt\"\n"), "neither"),
        ] {
            let cfg = write(dir.path(), "bad.toml", body);
            let err = load(&cfg, &Overrides::default()).unwrap_err().to_string();
            assert!(err.contains(needle), "{body}\n=> {err}");
        }
    }

    #[test]
    fn hash_ignores_output_location() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "raw.jsonl", "");
        let a = load(&write(dir.path(), "a.toml", MINIMAL), &Overrides::default()).unwrap();
        let b = load(&write(dir.path(), "b.toml", &MINIMAL.replace("\"out\"", "\"elsewhere\"")), &Overrides::default()).unwrap();
        let c = load(&write(dir.path(), "c.toml", &format!("seed = 3\n{MINIMAL}")), &Overrides::default()).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
    }
}
