//! Manual validation pass over the ingested corpus.
//!
//! Decisions are persisted to `review/progress.json` after every keystroke
//! so an interrupted session resumes at the first undecided record. The
//! end state is `review/verdicts.csv` (keep/drop per reviewed id) and
//! `review/overrides.csv` (only labels that differ from the lexicon's).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use sentiment_core::corpus::{write_verdicts, Verdict, Verdicts};
use sentiment_core::lexicon::{score_document, write_label_overrides, LexiconDict, LexiconVerdict};
use sentiment_core::preprocess::{cleanse, tokenize};
use sentiment_core::SentimentLabel;

use crate::config::Resolved;
use crate::error::{invalid, CliError, CliResult};
use crate::manifest::sha256_hex;
use crate::stages::{load_lexicon, read_corpus, write_file, Layout};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub verdict: Verdict,
    /// Set only when the reviewer's label differs from the proposed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SentimentLabel>,
}

#[derive(Serialize, Deserialize)]
struct ProgressFile {
    decisions: Vec<Decision>,
    checksum: String,
}

fn checksum(decisions: &[Decision]) -> String {
    sha256_hex(serde_json::to_string(decisions).expect("decisions serialize").as_bytes())
}

pub fn load_progress(path: &Path) -> CliResult<Vec<Decision>> {
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let file: ProgressFile = serde_json::from_str(&text).map_err(|e| anyhow!("corrupt review progress file {}: {e}", path.display()))?;
    if checksum(&file.decisions) != file.checksum {
        return Err(CliError::Runtime(anyhow!("corrupt review progress file {}: checksum mismatch", path.display())));
    }
    Ok(file.decisions)
}

fn save_progress(path: &Path, decisions: &[Decision]) -> CliResult<()> {
    let file = ProgressFile {
        decisions: decisions.to_vec(),
        checksum: checksum(decisions),
    };
    let tmp = path.with_extension("json.tmp");
    write_file(&tmp, format!("{}\n", serde_json::to_string_pretty(&file)?).as_bytes())?;
    std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

struct Item {
    id: String,
    text: String,
    proposed: LexiconVerdict,
}

fn decide(item: &Item, verdict: Verdict, label: Option<SentimentLabel>) -> Decision {
    let label = match verdict {
        Verdict::Drop => None,
        Verdict::Keep => label.filter(|l| *l != item.proposed.label),
    };
    Decision {
        id: item.id.clone(),
        verdict,
        label,
    }
}

fn write_outputs(layout: &Layout, decisions: &[Decision], r: &Resolved) -> CliResult<()> {
    let verdicts: Verdicts = decisions.iter().map(|d| (d.id.clone(), d.verdict)).collect();
    let overrides: BTreeMap<String, SentimentLabel> = decisions.iter().filter_map(|d| d.label.map(|l| (d.id.clone(), l))).collect();
    let mut vbuf = Vec::new();
    write_verdicts(&mut vbuf, &verdicts)?;
    write_file(&layout.verdicts(), &vbuf)?;
    let mut obuf = Vec::new();
    write_label_overrides(&mut obuf, &overrides)?;
    write_file(&layout.overrides(), &obuf)?;
    let mut manifest = crate::manifest::ManifestBuilder::new("review", &r.config_hash, &r.output_dir, &r.config_dir);
    manifest.input(&layout.corpus())?;
    manifest.output(&layout.progress())?;
    manifest.output(&layout.verdicts())?;
    manifest.output(&layout.overrides())?;
    manifest.finish()?;
    Ok(())
}

#[derive(Deserialize)]
struct ImportRow {
    id: String,
    final_label: SentimentLabel,
    #[serde(default)]
    verdict: Option<Verdict>,
}

/// Reads `id,final_label[,verdict]` rows (extra columns such as those of
/// the labeling worksheet are ignored). A missing verdict means keep.
fn read_import(path: &Path) -> CliResult<Vec<ImportRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        rows.push(row.map_err(|e| invalid(format!("{} row {}: {e}", path.display(), i + 2)))?);
    }
    Ok(rows)
}

pub struct ReviewOptions<'a> {
    pub import: Option<&'a Path>,
    pub reset: bool,
}

pub fn review<R: BufRead, W: Write>(r: &Resolved, options: ReviewOptions<'_>, mut input: R, mut out: W) -> CliResult<String> {
    let layout = Layout::new(&r.output_dir);
    let records = read_corpus(r, "review")?;
    let mut scratch = crate::manifest::ManifestBuilder::new("review", &r.config_hash, &r.output_dir, &r.config_dir);
    let dict: LexiconDict = load_lexicon(r, &mut scratch)?;
    let items: Vec<Item> = records
        .iter()
        .map(|rec| Item {
            id: rec.id.clone(),
            text: rec.text.clone(),
            proposed: score_document(&tokenize(&cleanse(&rec.text)), &dict),
        })
        .collect();
    let import_rows = options.import.map(read_import).transpose()?;

    let mut decisions = if options.reset { Vec::new() } else { load_progress(&layout.progress())? };

    if let Some(rows) = import_rows {
        let by_id: BTreeMap<&str, &Item> = items.iter().map(|i| (i.id.as_str(), i)).collect();
        let unknown: Vec<&str> = rows.iter().filter(|row| !by_id.contains_key(row.id.as_str())).map(|row| row.id.as_str()).collect();
        if !unknown.is_empty() {
            return Err(invalid(format!("import names ids that are not in the corpus: {}", unknown.join(", "))));
        }
        let imported: BTreeMap<&str, &ImportRow> = rows.iter().map(|row| (row.id.as_str(), row)).collect();
        decisions.retain(|d| !imported.contains_key(d.id.as_str()));
        for item in &items {
            if let Some(row) = imported.get(item.id.as_str()) {
                decisions.push(decide(item, row.verdict.unwrap_or(Verdict::Keep), Some(row.final_label)));
            }
        }
        save_progress(&layout.progress(), &decisions)?;
        write_outputs(&layout, &decisions, r)?;
        return Ok(format!("review: imported {} decisions; {} of {} records reviewed", rows.len(), decisions.len(), items.len()));
    }

    let total = items.len();
    let mut line = String::new();
    let mut quit = false;
    for (index, item) in items.iter().enumerate() {
        if quit {
            break;
        }
        if decisions.iter().any(|d| d.id == item.id) {
            continue;
        }
        writeln!(out, "\n[{}/{}] {}\n{}\nlexicon: {} (score {})", index + 1, total, item.id, item.text, item.proposed.label, item.proposed.score)?;
        loop {
            write!(out, "[k]eep  [d]rop  label [n]egative/ne[u]tral/[p]ositive  [q]uit > ")?;
            out.flush()?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                quit = true;
                break;
            }
            let decision = match line.trim() {
                "k" => decide(item, Verdict::Keep, None),
                "d" => decide(item, Verdict::Drop, None),
                "n" => decide(item, Verdict::Keep, Some(SentimentLabel::Negative)),
                "u" => decide(item, Verdict::Keep, Some(SentimentLabel::Neutral)),
                "p" => decide(item, Verdict::Keep, Some(SentimentLabel::Positive)),
                "q" => {
                    quit = true;
                    break;
                }
                other => {
                    writeln!(out, "unrecognized input {other:?}")?;
                    continue;
                }
            };
            decisions.push(decision);
            save_progress(&layout.progress(), &decisions)?;
            break;
        }
    }
    writeln!(out)?;
    if !layout.progress().is_file() {
        save_progress(&layout.progress(), &decisions)?;
    }
    write_outputs(&layout, &decisions, r)?;
    let remaining = items.iter().filter(|i| !decisions.iter().any(|d| d.id == i.id)).count();
    Ok(format!("review: {} of {total} records reviewed, {remaining} remaining", total - remaining))
}
