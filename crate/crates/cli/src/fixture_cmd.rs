use std::path::Path;

use sentiment_core::corpus::write_jsonl;
use sentiment_core::fixture::{synthetic_tweets, SyntheticSpec};

use crate::error::CliResult;
use crate::stages::{write_file, write_lines};

/// Writes `raw/tweets.jsonl`, `truth.csv` and a ready-to-run
/// `sentiment.toml` into `dir`.
pub fn write_fixture(dir: &Path, per_class: usize, seed: u64) -> CliResult<String> {
    let spec = SyntheticSpec {
        per_class,
        seed,
        ..SyntheticSpec::default()
    };
    let tweets = synthetic_tweets(&spec);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &tweets.records)?;
    write_file(&dir.join("raw").join("tweets.jsonl"), &buf)?;
    write_lines(&dir.join("truth.csv"), std::iter::once("id,label".to_string()).chain(tweets.truth.iter().map(|(id, l)| format!("{id},{l}"))))?;
    let config = format!(
        r#"seed = {seed}
output_dir = "out"

[paths]
corpus = ["raw/tweets.jsonl"]

[ingest]
keywords = ["ppkm", "covid"]
keyword_match = "any"

[split]
ratio = [4877, 293, 145]
stratified = true

[model]
kinds = ["lexicon", "mnb", "svm", "bert"]
profile = "desk"

[viz]
top_k = 20
ngram_orders = [1, 2]
"#
    );
    write_file(&dir.join("sentiment.toml"), config.as_bytes())?;
    Ok(format!("fixture: {} raw posts written to {}", tweets.records.len(), dir.display()))
}
