//! `sentiment`: runs the tweet sentiment pipeline from a TOML config.
//!
//! Exit status: 0 on success, 1 for invalid configuration or a stage run
//! out of order, 2 for runtime failures.

mod config;
mod error;
mod fixture_cmd;
mod manifest;
mod review;
mod stages;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ModelKind, Overrides};
use error::CliResult;

#[derive(Parser)]
#[command(name = "sentiment", version, about = "Tweet sentiment pipeline: ingest, review, label, train, eval, viz")]
struct Cli {
    /// Pipeline config file.
    #[arg(short, long, global = true, default_value = "sentiment.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read raw post files, drop duplicates and irrelevant posts.
    Ingest,
    /// Step through the corpus in the terminal, or import a worksheet.
    Review {
        /// CSV with `id,final_label` and optional `verdict` columns.
        #[arg(long)]
        import: Option<PathBuf>,
        /// Discard saved progress and start over.
        #[arg(long)]
        reset: bool,
    },
    /// Clean, label with the lexicon (plus review overrides) and split.
    Label,
    /// Fit the configured models.
    Train {
        /// Models to train instead of the configured ones.
        #[arg(long = "model", value_parser = parse_kind)]
        models: Vec<ModelKind>,
        /// `paper` or `desk`.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Score every configured model on the test split.
    Eval {
        #[arg(long = "model", value_parser = parse_kind)]
        models: Vec<ModelKind>,
    },
    /// Write n-gram tables, word-cloud weights, the label distribution and SVGs.
    Viz,
    /// Rank models by macro F from report files, or from the configured reports.
    Compare { reports: Vec<PathBuf> },
    /// ingest, label, train, eval and viz in sequence.
    Run,
    /// Generate a synthetic corpus and a config that runs on it.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 2021)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn execute(cli: Cli) -> CliResult<String> {
    let load = |o: Overrides| config::load(&cli.config, &o);
    match cli.command {
        Command::Fixture { out, per_class, seed } => fixture_cmd::write_fixture(&out, per_class, seed),
        Command::Compare { reports } if !reports.is_empty() => stages::compare_reports(None, &reports),
        Command::Compare { .. } => stages::compare_reports(Some(&load(Overrides::default())?), &[]),
        Command::Ingest => stages::ingest(&load(Overrides::default())?),
        Command::Review { import, reset } => {
            let r = load(Overrides::default())?;
            let stdin = io::stdin();
            review::review(&r, review::ReviewOptions { import: import.as_deref(), reset }, stdin.lock(), io::stdout())
        }
        Command::Label => stages::label(&load(Overrides::default())?),
        Command::Train { models, profile, epochs, batch_size, learning_rate } => stages::train(&load(Overrides {
            kinds: models,
            profile,
            batch_size,
            epochs,
            learning_rate,
        })?),
        Command::Eval { models } => stages::eval(&load(Overrides { kinds: models, ..Overrides::default() })?),
        Command::Viz => stages::visualize(&load(Overrides::default())?),
        Command::Run => stages::run_all(&load(Overrides::default())?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
