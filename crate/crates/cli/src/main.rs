//! `reactive`: harvest, inspect and synthesize cue-labeled sarcasm data.
//!
//! Exit codes: 0 on success, 1 on operational errors (I/O, source
//! failures), 2 on usage errors. Every flag is validated before any output
//! file is created.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use reactive_core::cue::QUERY_PHRASE;
use reactive_core::pipeline::DEFAULT_MAX_THREAD_LENGTH;
use reactive_core::sequence::is_canonical;
use reactive_core::stats::{read_records, render_text, StatsAccumulator};
use reactive_core::synth::{default_mix, generate_corpus, MixEntry};
use reactive_core::{
    classify_cue, harvest, hashtag_harvest, match_roles, sample_negatives, HarvestConfig, HarvestError,
    NegativeLexicon, PersonClass, SourceConfig,
};

#[derive(Debug, Parser)]
#[command(name = "reactive", version, about = "Harvest labeled sarcasm data from reply threads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find cue replies, trace their threads and write labeled instances.
    Harvest {
        /// Source config (TOML) or a JSON Lines corpus.
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value = QUERY_PHRASE)]
        query: String,
        /// Only consider cues in this language.
        #[arg(long)]
        lang: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_THREAD_LENGTH)]
        max_thread_len: usize,
        /// Stop after this many in-scope cue candidates.
        #[arg(long)]
        max_candidates: Option<usize>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Keep every instance even when several cues target the same tweet.
        #[arg(long)]
        no_dedup: bool,
        /// Dataset output (JSON Lines).
        #[arg(long)]
        out: PathBuf,
        /// Also write the counter report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Classify the grammatical person of a cue.
    Classify {
        #[arg(long)]
        text: String,
    },
    /// Match a canonical author sequence (cue first) against a person pattern.
    Match {
        #[arg(long)]
        sequence: String,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        person: u8,
    },
    /// Sample non-sarcastic tweets.
    Negatives {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        count: usize,
        /// Word/hashtag list, one per line; defaults to the built-in list.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        /// Draw a seeded random sample instead of the first eligible tweets.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect tweets ending in one of the given hashtags.
    Hashtags {
        #[arg(long)]
        source: PathBuf,
        /// Comma-separated, e.g. "#sarcasm,#irony".
        #[arg(long, value_delimiter = ',', required = true)]
        tags: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a harvested dataset.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
    /// Generate a synthetic corpus with known ground truth.
    Synth {
        /// JSON array of {template, person, count}; defaults to the built-in mix.
        #[arg(long)]
        mix: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, value_parser = parse_fraction)]
        ambiguous: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not within [0, 1]"))
    }
}

fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, message).exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Harvest { source, query, lang, max_thread_len, max_candidates, workers, no_dedup, out, report } => {
            let config = HarvestConfig {
                query,
                lang_filter: lang,
                max_thread_length: max_thread_len,
                max_candidates,
                window: None,
                dedup: !no_dedup,
                workers,
            };
            if let Err(e) = config.validate() {
                usage_error(e);
            }
            let source = SourceConfig::load(&source)?.open()?;
            let mut writer = create(&out)?;
            let result = harvest(source.as_ref(), &config, |i| i.write_jsonl(&mut writer));
            writer.flush().with_context(|| format!("writing {}", out.display()))?;
            let (summary, failure) = match result {
                Ok(r) => (r, None),
                Err(HarvestError::Source { source, partial }) => (*partial, Some(source)),
                Err(e) => return Err(e.into()),
            };
            let text = summary.to_text();
            print!("{text}");
            if let Some(path) = report {
                fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(e) = failure {
                eprintln!("error: source failed, output is partial: {e}");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Classify { text } => {
            let d = classify_cue(&text);
            println!(
                "person={} reason={} token={}",
                d.person,
                d.reason.as_str(),
                d.matched_pronoun.as_deref().unwrap_or("-")
            );
        }
        Command::Match { sequence, person } => {
            if !is_canonical(&sequence) || sequence.is_empty() {
                usage_error(format!("{sequence:?} is not a canonical author sequence (A first, new letters in order)"));
            }
            let person = PersonClass::from_number(person).expect("range-checked by clap");
            match match_roles(&sequence, person) {
                Some(r) => {
                    let opt = |i: Option<usize>| i.map_or("-".to_string(), |i| i.to_string());
                    println!(
                        "sarc={} obl={} eli={}",
                        r.sarcastic_index,
                        opt(r.oblivious_index),
                        opt(r.eliciting_index)
                    );
                }
                None => println!("NOMATCH"),
            }
        }
        Command::Negatives { source, count, lexicon, lang, seed, out } => {
            let lexicon = match lexicon {
                Some(path) => NegativeLexicon::parse(&read(&path)?),
                None => NegativeLexicon::default(),
            };
            let source = SourceConfig::load(&source)?.open()?;
            let negatives = sample_negatives(source.as_ref(), count, &lexicon, lang.as_deref(), seed)?;
            let mut writer = create(&out)?;
            for n in &negatives {
                n.write_jsonl(&mut writer)?;
            }
            writer.flush()?;
            println!("negatives: {}", negatives.len());
        }
        Command::Hashtags { source, tags, out } => {
            let tags: Vec<String> = tags.into_iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
            if let Some(bad) = tags.iter().find(|t| !t.starts_with('#') || t.len() < 2) {
                usage_error(format!("{bad:?} is not a hashtag"));
            }
            let source = SourceConfig::load(&source)?.open()?;
            let harvest = hashtag_harvest(source.as_ref(), &tags)?;
            let mut writer = create(&out)?;
            for t in &harvest.tweets {
                serde_json::to_writer(&mut writer, t)?;
                writer.write_all(b"\n")?;
            }
            writer.flush()?;
            let r = &harvest.report;
            println!("scanned: {}", r.scanned);
            println!("kept: {}", r.kept);
            println!("days: {}", r.days);
            println!("tweets_per_day: {:.1}", r.tweets_per_day);
        }
        Command::Stats { input, format, top_k } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let records = read_records(BufReader::new(file)).with_context(|| format!("reading {}", input.display()))?;
            let stats = StatsAccumulator::from_records(&records).finish(top_k);
            match format {
                Format::Text => print!("{}", render_text(&stats)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
            }
        }
        Command::Synth { mix, seed, ambiguous, out, truth } => {
            let mix: Vec<MixEntry> = match mix {
                Some(path) => {
                    serde_json::from_str(&read(&path)?).with_context(|| format!("parsing {}", path.display()))?
                }
                None => default_mix(),
            };
            let corpus = generate_corpus(&mix, ambiguous, seed)?;
            let mut writer = create(&out)?;
            corpus.write_corpus(&mut writer)?;
            writer.flush()?;
            let mut writer = create(&truth)?;
            corpus.write_truth(&mut writer)?;
            writer.flush()?;
            println!("threads: {}", corpus.threads.len());
            println!("tweets: {}", corpus.tweets().count());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}
