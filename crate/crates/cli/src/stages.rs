//! The pipeline stages. Each one checks its inputs exist, writes its
//! outputs under the output directory and records a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sentiment_core::bow::{build_vocab, mnb_predict, mnb_train, read_model, svm_predict, svm_train, write_model, BowModel, SvmConfig};
use sentiment_core::corpus::{self, dedupe, filter_relevant, ingest_file, read_jsonl, read_verdicts, write_jsonl, IngestIssue, Keywords, TweetRecord, Verdict, Verdicts};
use sentiment_core::encoder::{self, build_token_vocab, fine_tune, read_checkpoint, write_checkpoint, TokenVocab};
use sentiment_core::eval::{compare, confusion, metrics, MetricsReport};
use sentiment_core::lexicon::{label_corpus, read_label_overrides, score_document, write_worksheet, LexiconDict};
use sentiment_core::preprocess::{tokenize, StopwordDict};
use sentiment_core::viz::{self, cloud_weights, ngrams, render_svg, sentiment_distribution, Chart};
use sentiment_core::{Document, SentimentLabel};

use crate::config::{ModelKind, Resolved};
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_file(path, format!("{}\n", serde_json::to_string_pretty(value)?).as_bytes())
}

fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, items)?;
    write_file(path, &buf)
}

fn read_jsonl_file<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?)
}

/// Every artifact location, derived from the output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }
    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }
    pub fn ingest_report(&self) -> PathBuf {
        self.root.join("ingest_report.json")
    }
    pub fn review_dir(&self) -> PathBuf {
        self.root.join("review")
    }
    pub fn verdicts(&self) -> PathBuf {
        self.review_dir().join("verdicts.csv")
    }
    pub fn overrides(&self) -> PathBuf {
        self.review_dir().join("overrides.csv")
    }
    pub fn progress(&self) -> PathBuf {
        self.review_dir().join("progress.json")
    }
    pub fn labeled(&self) -> PathBuf {
        self.root.join("labeled.jsonl")
    }
    pub fn worksheet(&self) -> PathBuf {
        self.root.join("worksheet.csv")
    }
    pub fn label_report(&self) -> PathBuf {
        self.root.join("label_report.json")
    }
    pub fn split(&self, part: &str) -> PathBuf {
        self.root.join("splits").join(format!("{part}.jsonl"))
    }
    pub fn model(&self, file: &str) -> PathBuf {
        self.root.join("models").join(file)
    }
    pub fn report(&self, file: &str) -> PathBuf {
        self.root.join("reports").join(file)
    }
    pub fn viz(&self, file: &str) -> PathBuf {
        self.root.join("viz").join(file)
    }
}

fn require(stage: &'static str, path: PathBuf, producer: &'static str) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { stage, path, producer })
    }
}

pub fn load_stopwords(r: &Resolved, manifest: &mut ManifestBuilder<'_>) -> CliResult<StopwordDict> {
    match &r.stopwords {
        Some(p) => {
            manifest.input(p)?;
            Ok(StopwordDict::load(p)?)
        }
        None => {
            let dict = StopwordDict::bundled();
            manifest.input_bytes("bundled:stopwords", dict.words().collect::<Vec<_>>().join("\n").as_bytes());
            Ok(dict)
        }
    }
}

pub fn load_lexicon(r: &Resolved, manifest: &mut ManifestBuilder<'_>) -> CliResult<LexiconDict> {
    match &r.lexicon {
        Some((pos, neg)) => {
            manifest.input(pos)?;
            manifest.input(neg)?;
            Ok(sentiment_core::lexicon::load_lexicon(pos, neg)?)
        }
        None => {
            let dict = LexiconDict::bundled();
            let flat = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join("\n");
            manifest.input_bytes("bundled:lexicon-positive", flat(dict.positive()).as_bytes());
            manifest.input_bytes("bundled:lexicon-negative", flat(dict.negative()).as_bytes());
            Ok(dict)
        }
    }
}

fn builder<'a>(stage: &str, r: &'a Resolved) -> ManifestBuilder<'a> {
    ManifestBuilder::new(stage, &r.config_hash, &r.output_dir, &r.config_dir)
}

#[derive(Serialize)]
struct FileReport {
    path: String,
    records: usize,
    malformed: usize,
    duplicate_ids: usize,
    issues: Vec<IngestIssue>,
}

#[derive(Serialize)]
struct IngestReport {
    files: Vec<FileReport>,
    raw_records: usize,
    duplicates_removed: usize,
    dropped_by_keyword: usize,
    kept: usize,
}

pub fn ingest(r: &Resolved) -> CliResult<String> {
    let layout = Layout::new(&r.output_dir);
    let mut manifest = builder("ingest", r);
    let keywords = Keywords::new(r.config.ingest.keywords.clone(), r.config.ingest.keyword_match)?;
    let mut records = Vec::new();
    let mut files = Vec::new();
    for (path, format) in &r.corpus {
        manifest.input(path)?;
        let got = ingest_file(path, *format, &keywords).with_context(|| format!("ingesting {}", path.display()))?;
        let count = |dup: bool| got.issues.iter().filter(|i| matches!(i, IngestIssue::DuplicateId { .. }) == dup).count();
        files.push(FileReport {
            path: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            records: got.records.len(),
            malformed: count(false),
            duplicate_ids: count(true),
            issues: got.issues.clone(),
        });
        records.extend(got.records);
    }
    let raw_records = records.len();
    let (unique, removed) = dedupe(&records, r.config.ingest.dedupe);
    let filtered = filter_relevant(&unique, &keywords, &Verdicts::new());
    let report = IngestReport {
        files,
        raw_records,
        duplicates_removed: removed.len(),
        dropped_by_keyword: filtered.dropped_by_keyword.len(),
        kept: filtered.kept.len(),
    };
    write_jsonl_file(&layout.corpus(), &filtered.kept)?;
    write_json(&layout.ingest_report(), &report)?;
    manifest.output(&layout.corpus())?;
    manifest.output(&layout.ingest_report())?;
    manifest.finish()?;
    Ok(format!(
        "ingest: {raw_records} raw records, {} duplicates removed, {} irrelevant, {} kept",
        report.duplicates_removed, report.dropped_by_keyword, report.kept
    ))
}

/// Corpus records in ingest order.
pub fn read_corpus(r: &Resolved, stage: &'static str) -> CliResult<Vec<TweetRecord>> {
    let path = require(stage, Layout::new(&r.output_dir).corpus(), "ingest")?;
    read_jsonl_file(&path)
}

#[derive(Serialize)]
struct LabelReport {
    documents: usize,
    dropped_by_review: usize,
    overrides_applied: usize,
    unknown_overrides: Vec<String>,
    distribution: viz::Distribution,
    train: usize,
    validation: usize,
    test: usize,
}

pub fn label(r: &Resolved) -> CliResult<String> {
    let layout = Layout::new(&r.output_dir);
    let records = read_corpus(r, "label")?;
    let mut manifest = builder("label", r);
    manifest.input(&layout.corpus())?;
    let stop = load_stopwords(r, &mut manifest)?;
    let dict = load_lexicon(r, &mut manifest)?;
    let verdicts = if layout.verdicts().is_file() {
        manifest.input(&layout.verdicts())?;
        read_verdicts(File::open(layout.verdicts())?)?
    } else {
        Verdicts::new()
    };
    let overrides = if layout.overrides().is_file() {
        manifest.input(&layout.overrides())?;
        read_label_overrides(File::open(layout.overrides())?)?
    } else {
        BTreeMap::new()
    };
    let kept: Vec<&TweetRecord> = records.iter().filter(|rec| verdicts.get(&rec.id) != Some(&Verdict::Drop)).collect();
    let docs: Vec<Document> = kept.iter().map(|rec| Document::from_raw(rec.id.clone(), rec.text.clone(), &stop)).collect();
    let outcome = label_corpus(&docs, &dict, &overrides);
    let parts = corpus::split(&outcome.documents, &r.split).context("splitting the labeled corpus")?;

    write_jsonl_file(&layout.labeled(), &outcome.documents)?;
    let mut sheet = Vec::new();
    write_worksheet(&mut sheet, &outcome.worksheet)?;
    write_file(&layout.worksheet(), &sheet)?;
    for (name, part) in [("train", &parts.train), ("validation", &parts.validation), ("test", &parts.test)] {
        write_jsonl_file(&layout.split(name), part)?;
    }
    let report = LabelReport {
        documents: outcome.documents.len(),
        dropped_by_review: records.len() - kept.len(),
        overrides_applied: overrides.len() - outcome.unknown_overrides.len(),
        unknown_overrides: outcome.unknown_overrides.clone(),
        distribution: sentiment_distribution(&outcome.documents)?,
        train: parts.train.len(),
        validation: parts.validation.len(),
        test: parts.test.len(),
    };
    write_json(&layout.label_report(), &report)?;
    for p in [layout.labeled(), layout.worksheet(), layout.split("train"), layout.split("validation"), layout.split("test"), layout.label_report()] {
        manifest.output(&p)?;
    }
    manifest.finish()?;
    let d = report.distribution;
    Ok(format!(
        "label: {} documents ({} negative, {} neutral, {} positive); split {}/{}/{}",
        report.documents, d.negative, d.neutral, d.positive, report.train, report.validation, report.test
    ))
}

fn read_split(r: &Resolved, stage: &'static str, part: &str) -> CliResult<Vec<Document>> {
    let path = require(stage, Layout::new(&r.output_dir).split(part), "label")?;
    read_jsonl_file(&path)
}

pub fn train(r: &Resolved) -> CliResult<String> {
    let layout = Layout::new(&r.output_dir);
    let train = read_split(r, "train", "train")?;
    let validation = read_split(r, "train", "validation")?;
    let mut manifest = builder("train", r);
    manifest.input(&layout.split("train"))?;
    manifest.input(&layout.split("validation"))?;
    let mut lines = Vec::new();
    for kind in &r.config.model.kinds {
        match kind {
            ModelKind::Lexicon => lines.push("lexicon: nothing to train".to_string()),
            ModelKind::Mnb => {
                let m = &r.config.model.mnb;
                let vocab = build_vocab(&train, m.min_count)?;
                let model = mnb_train(&train, &vocab, m.alpha)?;
                let path = layout.model("mnb.json");
                let mut buf = Vec::new();
                write_model(&mut buf, &vocab, &BowModel::Mnb(model))?;
                write_file(&path, &buf)?;
                manifest.output(&path)?;
                lines.push(format!("mnb: vocabulary {}", vocab.len()));
            }
            ModelKind::Svm => {
                let s = &r.config.model.svm;
                let vocab = build_vocab(&train, s.min_count)?;
                let config = SvmConfig {
                    lambda: s.lambda,
                    epochs: s.epochs,
                    seed: r.config.seed,
                    feature_mode: s.feature_mode,
                };
                let model = svm_train(&train, &vocab, &config)?;
                let objective = model.final_objective;
                let path = layout.model("svm.json");
                let mut buf = Vec::new();
                write_model(&mut buf, &vocab, &BowModel::Svm(model))?;
                write_file(&path, &buf)?;
                manifest.output(&path)?;
                lines.push(format!("svm: vocabulary {}, final objectives {objective:.4?}", vocab.len()));
            }
            ModelKind::Bert => {
                let vocab = build_token_vocab(&train, r.config.model.encoder.min_count)?;
                let config = r.encoder_config(vocab.len());
                config.validate().map_err(|e| crate::error::invalid(e.to_string()))?;
                let (params, history) = fine_tune(&train, &validation, &vocab, &config, &r.profile)?;
                let ckpt = layout.model("bert.ckpt");
                let mut buf = Vec::new();
                write_checkpoint(&mut buf, &config, &params)?;
                write_file(&ckpt, &buf)?;
                let vocab_path = layout.model("bert.vocab");
                let mut vbuf = Vec::new();
                vocab.write(&mut vbuf)?;
                write_file(&vocab_path, &vbuf)?;
                let history_path = layout.model("bert_history.csv");
                write_file(&history_path, history.to_csv().as_bytes())?;
                let profile_path = layout.model("bert_profile.toml");
                write_file(&profile_path, toml::to_string(&r.profile)?.as_bytes())?;
                for p in [&ckpt, &vocab_path, &history_path, &profile_path] {
                    manifest.output(p)?;
                }
                let last = history.epochs.last().expect("at least one epoch");
                lines.push(format!(
                    "bert: {} epochs, batch {}, lr {}; final train loss {:.4}, train acc {:.4}",
                    history.epochs.len(),
                    history.batch_size,
                    history.learning_rate,
                    last.train_loss,
                    last.train_acc
                ));
            }
        }
    }
    manifest.finish()?;
    Ok(lines.join("\n"))
}

/// Report file written by `eval` and read by `compare`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub metrics: MetricsReport,
}

fn predict_all(r: &Resolved, kind: ModelKind, docs: &[Document], manifest: &mut ManifestBuilder<'_>) -> CliResult<Vec<SentimentLabel>> {
    let layout = Layout::new(&r.output_dir);
    match kind {
        ModelKind::Lexicon => {
            let dict = load_lexicon(r, manifest)?;
            Ok(docs.iter().map(|d| score_document(&tokenize(&d.clean_text), &dict).label).collect())
        }
        ModelKind::Mnb | ModelKind::Svm => {
            let path = require("eval", layout.model(&format!("{}.json", kind.name())), "train")?;
            manifest.input(&path)?;
            let (vocab, model) = read_model(BufReader::new(File::open(&path)?)).with_context(|| format!("loading {}", path.display()))?;
            Ok(docs
                .iter()
                .map(|d| match &model {
                    BowModel::Mnb(m) => mnb_predict(d, m, &vocab).0,
                    BowModel::Svm(m) => svm_predict(d, m, &vocab).0,
                })
                .collect())
        }
        ModelKind::Bert => {
            let ckpt = require("eval", layout.model("bert.ckpt"), "train")?;
            let vocab_path = require("eval", layout.model("bert.vocab"), "train")?;
            manifest.input(&ckpt)?;
            manifest.input(&vocab_path)?;
            let (config, params) = read_checkpoint(BufReader::new(File::open(&ckpt)?))?;
            let vocab = TokenVocab::read(BufReader::new(File::open(&vocab_path)?))?;
            docs.iter()
                .map(|d| Ok(encoder::predict(d, &params, &vocab, &config)?.0))
                .collect()
        }
    }
}

pub fn eval(r: &Resolved) -> CliResult<String> {
    let layout = Layout::new(&r.output_dir);
    let test = read_split(r, "eval", "test")?;
    if test.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!("the test split is empty")));
    }
    let mut manifest = builder("eval", r);
    manifest.input(&layout.split("test"))?;
    let truth: Vec<SentimentLabel> = test.iter().map(|d| d.label.context("test document without label")).collect::<Result<_, _>>()?;
    let mut reports = Vec::new();
    for &kind in &r.config.model.kinds {
        let predicted = predict_all(r, kind, &test, &mut manifest)?;
        let report = ModelReport {
            model: kind.name().to_string(),
            metrics: metrics(&confusion(&truth, &predicted)?)?,
        };
        let path = layout.report(&format!("{}.json", kind.name()));
        write_json(&path, &report)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "truth", "predicted"])?;
        for ((d, t), p) in test.iter().zip(&truth).zip(&predicted) {
            w.write_record([d.id.as_str(), t.as_str(), p.as_str()])?;
        }
        let pred_path = layout.report(&format!("{}_predictions.csv", kind.name()));
        write_file(&pred_path, &w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
        manifest.output(&path)?;
        manifest.output(&pred_path)?;
        reports.push(report);
    }
    let mut out = Vec::new();
    if reports.len() >= 2 {
        let (csv_path, txt_path) = write_comparison(&layout, &reports)?;
        manifest.output(&csv_path)?;
        manifest.output(&txt_path)?;
        out.push(std::fs::read_to_string(txt_path)?);
    } else {
        let m = &reports[0].metrics;
        out.push(format!("{}: macro F {:.4}, accuracy {:.4}", reports[0].model, m.macro_f_score, m.accuracy));
    }
    manifest.finish()?;
    Ok(out.join("\n"))
}

fn write_comparison(layout: &Layout, reports: &[ModelReport]) -> CliResult<(PathBuf, PathBuf)> {
    let named: Vec<(String, MetricsReport)> = reports.iter().map(|r| (r.model.clone(), r.metrics.clone())).collect();
    let table = compare(&named)?;
    let csv_path = layout.report("comparison.csv");
    let txt_path = layout.report("comparison.txt");
    write_file(&csv_path, table.to_csv().as_bytes())?;
    write_file(&txt_path, table.to_text().as_bytes())?;
    Ok((csv_path, txt_path))
}

/// Compares report files; with no files, the configured models' reports.
pub fn compare_reports(r: Option<&Resolved>, files: &[PathBuf]) -> CliResult<String> {
    let paths: Vec<PathBuf> = if files.is_empty() {
        let r = r.ok_or_else(|| crate::error::invalid("give report files or a config"))?;
        let layout = Layout::new(&r.output_dir);
        r.config
            .model
            .kinds
            .iter()
            .map(|k| require("compare", layout.report(&format!("{}.json", k.name())), "eval"))
            .collect::<CliResult<_>>()?
    } else {
        files.to_vec()
    };
    if paths.len() < 2 {
        return Err(crate::error::invalid("compare needs at least two reports"));
    }
    let mut reports = Vec::new();
    for p in &paths {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        reports.push(serde_json::from_str::<ModelReport>(&text).with_context(|| format!("parsing {}", p.display()))?);
    }
    if let (true, Some(r)) = (files.is_empty(), r) {
        let layout = Layout::new(&r.output_dir);
        let mut manifest = builder("compare", r);
        for p in &paths {
            manifest.input(p)?;
        }
        let (csv_path, txt_path) = write_comparison(&layout, &reports)?;
        manifest.output(&csv_path)?;
        manifest.output(&txt_path)?;
        manifest.finish()?;
    }
    let named: Vec<(String, MetricsReport)> = reports.into_iter().map(|r| (r.model, r.metrics)).collect();
    Ok(compare(&named)?.to_text())
}

pub fn visualize(r: &Resolved) -> CliResult<String> {
    let layout = Layout::new(&r.output_dir);
    let path = require("viz", layout.labeled(), "label")?;
    let docs: Vec<Document> = read_jsonl_file(&path)?;
    let mut manifest = builder("viz", r);
    manifest.input(&path)?;
    let v = &r.config.viz;
    let mut written = Vec::new();
    for &n in &v.ngram_orders {
        let table = ngrams(&docs, n, Some(v.top_k))?;
        let csv_path = layout.viz(&format!("ngrams_{n}.csv"));
        write_file(&csv_path, table.to_csv().as_bytes())?;
        written.push(csv_path);
        if !table.entries.is_empty() {
            let svg = layout.viz(&format!("ngrams_{n}.svg"));
            render_svg(Chart::Ngrams(&table), &svg)?;
            written.push(svg);
        }
    }
    let extra: BTreeSet<String> = v.extra_stopwords.iter().cloned().collect();
    let cloud = cloud_weights(&docs, v.top_k, &extra);
    let cloud_json = layout.viz("cloud.json");
    write_file(&cloud_json, format!("{}\n", cloud.to_json()).as_bytes())?;
    written.push(cloud_json);
    if !cloud.entries.is_empty() {
        let svg = layout.viz("cloud.svg");
        render_svg(Chart::Cloud(&cloud), &svg)?;
        written.push(svg);
    }
    let dist = sentiment_distribution(&docs)?;
    let dist_csv = layout.viz("distribution.csv");
    write_file(&dist_csv, dist.to_csv().as_bytes())?;
    written.push(dist_csv);
    if dist.total() > 0 {
        let svg = layout.viz("distribution.svg");
        render_svg(Chart::Distribution(&dist), &svg)?;
        written.push(svg);
    }
    for p in &written {
        manifest.output(p)?;
    }
    manifest.finish()?;
    Ok(format!("viz: wrote {} files", written.len()))
}

/// Ingest, label, train, eval and viz in order. Review is interactive and
/// is not part of the run; its outputs are used if present.
pub fn run_all(r: &Resolved) -> CliResult<String> {
    let mut out = Vec::new();
    for stage in [ingest, label, train, eval, visualize] {
        out.push(stage(r)?);
    }
    Ok(out.join("\n"))
}

/// Writes a buffered file; used by the fixture generator.
pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}
