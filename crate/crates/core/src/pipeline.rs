//! The harvest pipeline: fetch cues, classify, traverse to the root, match
//! the author sequence, emit labeled instances.
//!
//! Also hosts negative sampling and the trailing-hashtag baseline collector.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io;

use chrono::{DateTime, NaiveDate, Utc};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{classify_cue, is_cue_candidate, tokenize, CueReason, QUERY_PHRASE};
use crate::matcher::match_roles;
use crate::sequence::{canonicalize, positions_of};
use crate::source::{ConversationSource, SourceError};
use crate::thread::{validate_thread, ConversationThread, PersonClass, Perspective, Tweet};

pub const DEFAULT_MAX_THREAD_LENGTH: usize = 100;

const DEFAULT_LEXICON: &str = include_str!("../data/negative_lexicon.txt");

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("conversation source failed")]
    Source {
        #[source]
        source: SourceError,
        /// Counters up to the failure; instances already emitted stay valid.
        partial: Box<HarvestReport>,
    },
    #[error(transparent)]
    SourceOnly(#[from] SourceError),
    #[error("invalid harvest configuration: {0}")]
    Config(String),
    #[error("only {available} eligible tweets, {requested} requested")]
    InsufficientSupply { requested: usize, available: usize },
    #[error("failed to write output")]
    Sink(#[from] std::io::Error),
    #[error("could not start worker pool: {0}")]
    Workers(String),
}

// ---------------------------------------------------------------------------
// Instances

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sarcastic,
    NonSarcastic,
}

/// One dataset row with the role tweets resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledInstance {
    pub label: Label,
    pub person: Option<PersonClass>,
    pub perspective: Option<Perspective>,
    /// The sarcastic tweet, or the sampled tweet for a negative.
    pub sarcastic_tweet: Tweet,
    pub cue_tweet: Option<Tweet>,
    pub oblivious_tweet: Option<Tweet>,
    pub eliciting_tweet: Option<Tweet>,
    pub author_sequence: Option<String>,
    pub position: Option<usize>,
    pub cue_lag: Option<usize>,
}

impl LabeledInstance {
    pub fn negative(tweet: Tweet) -> Self {
        LabeledInstance {
            label: Label::NonSarcastic,
            person: None,
            perspective: None,
            sarcastic_tweet: tweet,
            cue_tweet: None,
            oblivious_tweet: None,
            eliciting_tweet: None,
            author_sequence: None,
            position: None,
            cue_lag: None,
        }
    }

    pub fn to_record(&self) -> DatasetRecord {
        let id = |t: &Option<Tweet>| t.as_ref().map(|t| t.id.clone());
        let text = |t: &Option<Tweet>| t.as_ref().map(|t| t.text.clone());
        DatasetRecord {
            label: self.label,
            person: self.person.and_then(PersonClass::number),
            perspective: self.perspective,
            sar_id: self.sarcastic_tweet.id.clone(),
            sar_text: self.sarcastic_tweet.text.clone(),
            cue_id: id(&self.cue_tweet),
            cue_text: text(&self.cue_tweet),
            obl_id: id(&self.oblivious_tweet),
            obl_text: text(&self.oblivious_tweet),
            eli_id: id(&self.eliciting_tweet),
            eli_text: text(&self.eliciting_tweet),
            author_sequence: self.author_sequence.clone(),
            position: self.position,
            cue_lag: self.cue_lag,
        }
    }

    /// Writes this instance as one JSON Lines row.
    pub fn write_jsonl(&self, mut out: impl io::Write) -> io::Result<()> {
        serde_json::to_writer(&mut out, &self.to_record())?;
        out.write_all(b"\n")
    }
}

/// The output dataset's JSON Lines row. Absent roles serialize as `null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub label: Label,
    /// 1, 2 or 3.
    pub person: Option<u8>,
    pub perspective: Option<Perspective>,
    pub sar_id: String,
    pub sar_text: String,
    pub cue_id: Option<String>,
    pub cue_text: Option<String>,
    pub obl_id: Option<String>,
    pub obl_text: Option<String>,
    pub eli_id: Option<String>,
    pub eli_text: Option<String>,
    pub author_sequence: Option<String>,
    pub position: Option<usize>,
    pub cue_lag: Option<usize>,
}

impl DatasetRecord {
    pub fn person_class(&self) -> Option<PersonClass> {
        self.person.and_then(PersonClass::from_number)
    }
}

// ---------------------------------------------------------------------------
// Traverse

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BrokenReason {
    MissingParent,
    MalformedParent,
    TooLong,
    Cycle,
    InvalidChain,
}

impl BrokenReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BrokenReason::MissingParent => "missing_parent",
            BrokenReason::MalformedParent => "malformed_parent",
            BrokenReason::TooLong => "too_long",
            BrokenReason::Cycle => "cycle",
            BrokenReason::InvalidChain => "invalid_chain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Traversal {
    Thread(ConversationThread),
    Broken(BrokenReason),
}

/// Walks parent links from `cue` up to the root.
///
/// A chain with a hole, a loop, or more than `max_len` tweets is reported as
/// broken rather than truncated. Only unavailability of the source itself is
/// an error.
pub fn traverse<S>(source: &S, cue: &Tweet, max_len: usize) -> Result<Traversal, SourceError>
where
    S: ConversationSource + ?Sized,
{
    let mut chain = vec![cue.clone()];
    let mut seen: HashSet<String> = HashSet::from([cue.id.clone()]);
    while let Some(parent_id) = chain[chain.len() - 1].parent_id.clone() {
        if seen.contains(&parent_id) {
            return Ok(Traversal::Broken(BrokenReason::Cycle));
        }
        if chain.len() >= max_len {
            return Ok(Traversal::Broken(BrokenReason::TooLong));
        }
        let parent = match source.lookup_tweet(&parent_id) {
            Ok(Some(p)) => p,
            Ok(None) => return Ok(Traversal::Broken(BrokenReason::MissingParent)),
            Err(SourceError::MalformedRecord { .. }) => return Ok(Traversal::Broken(BrokenReason::MalformedParent)),
            Err(e) => return Err(e),
        };
        seen.insert(parent.id.clone());
        chain.push(parent);
    }
    Ok(match validate_thread(chain) {
        Ok(thread) => Traversal::Thread(thread),
        Err(_) => Traversal::Broken(BrokenReason::InvalidChain),
    })
}

// ---------------------------------------------------------------------------
// Harvest

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestConfig {
    pub query: String,
    /// Candidates in other languages are ignored before counting.
    pub lang_filter: Option<String>,
    pub max_thread_length: usize,
    /// Stop after this many counted candidates.
    pub max_candidates: Option<usize>,
    /// Inclusive `created_at` range for candidate cues.
    pub window: Option<(DateTime<Utc>, DateTime<Utc>)>,
    /// Emit each sarcastic tweet once, keeping the first cue that found it.
    pub dedup: bool,
    pub workers: usize,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            query: QUERY_PHRASE.to_string(),
            lang_filter: None,
            max_thread_length: DEFAULT_MAX_THREAD_LENGTH,
            max_candidates: None,
            window: None,
            dedup: true,
            workers: 1,
        }
    }
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<(), HarvestError> {
        if self.max_thread_length < 2 {
            return Err(HarvestError::Config("max_thread_length must be at least 2".into()));
        }
        if self.workers == 0 {
            return Err(HarvestError::Config("workers must be at least 1".into()));
        }
        if self.query.trim().is_empty() {
            return Err(HarvestError::Config("query must not be empty".into()));
        }
        if let Some((from, to)) = self.window {
            if from > to {
                return Err(HarvestError::Config("time window ends before it starts".into()));
            }
        }
        Ok(())
    }

    fn in_scope(&self, t: &Tweet) -> bool {
        self.lang_filter.as_deref().is_none_or(|l| t.lang == l)
            && self.window.is_none_or(|(from, to)| t.created_at >= from && t.created_at <= to)
    }
}

/// Counters for one harvest run.
///
/// `fetched == emitted + unknown_skips + broken_skips + nomatch_skips +
/// dedup_skips` always holds; `out_of_scope` candidates (language or time
/// window) are not counted as fetched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HarvestReport {
    pub fetched: usize,
    pub emitted: usize,
    pub unknown_skips: usize,
    pub broken_skips: usize,
    pub nomatch_skips: usize,
    pub dedup_skips: usize,
    pub out_of_scope: usize,
    pub malformed_records: usize,
    pub unknown_by_reason: BTreeMap<String, usize>,
    pub broken_by_reason: BTreeMap<String, usize>,
    pub emitted_by_person: BTreeMap<String, usize>,
    /// Sarcastic tweets found by more than one cue, with their cue counts.
    pub multi_cue: BTreeMap<String, usize>,
}

impl HarvestReport {
    pub fn is_conserved(&self) -> bool {
        self.fetched == self.emitted + self.unknown_skips + self.broken_skips + self.nomatch_skips + self.dedup_skips
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "fetched: {}", self.fetched);
        let _ = writeln!(out, "emitted: {}", self.emitted);
        let _ = writeln!(out, "unknown_skips: {}", self.unknown_skips);
        let _ = writeln!(out, "broken_skips: {}", self.broken_skips);
        let _ = writeln!(out, "nomatch_skips: {}", self.nomatch_skips);
        let _ = writeln!(out, "dedup_skips: {}", self.dedup_skips);
        let _ = writeln!(out, "out_of_scope: {}", self.out_of_scope);
        let _ = writeln!(out, "malformed_records: {}", self.malformed_records);
        for (group, map) in [
            ("unknown", &self.unknown_by_reason),
            ("broken", &self.broken_by_reason),
            ("emitted_person", &self.emitted_by_person),
        ] {
            for (k, v) in map {
                let _ = writeln!(out, "{group}.{k}: {v}");
            }
        }
        let _ = writeln!(out, "multi_cue_tweets: {}", self.multi_cue.len());
        out
    }
}

enum Outcome {
    Emit(Box<LabeledInstance>),
    Unknown(CueReason),
    Broken(BrokenReason),
    NoMatch,
}

fn process<S>(source: &S, cue: &Tweet, max_len: usize) -> Result<Outcome, SourceError>
where
    S: ConversationSource + ?Sized,
{
    let decision = classify_cue(&cue.text);
    if decision.person == PersonClass::Unknown {
        return Ok(Outcome::Unknown(decision.reason));
    }
    let person = decision.person;

    let thread = match traverse(source, cue, max_len)? {
        Traversal::Thread(t) => t,
        Traversal::Broken(reason) => return Ok(Outcome::Broken(reason)),
    };
    // More than 26 authors cannot be labeled, so cannot match either.
    let Ok(sequence) = canonicalize(&thread) else {
        return Ok(Outcome::NoMatch);
    };
    let Some(roles) = match_roles(sequence.letters(), person) else {
        return Ok(Outcome::NoMatch);
    };
    let (position, cue_lag) =
        positions_of(thread.len(), roles.sarcastic_index).expect("matched index lies inside the thread");
    let at = |i: Option<usize>| i.and_then(|i| thread.get(i)).cloned();

    Ok(Outcome::Emit(Box::new(LabeledInstance {
        label: Label::Sarcastic,
        person: Some(person),
        perspective: Some(roles.perspective),
        sarcastic_tweet: thread.tweets()[roles.sarcastic_index].clone(),
        cue_tweet: Some(thread.cue().clone()),
        oblivious_tweet: at(roles.oblivious_index),
        eliciting_tweet: at(roles.eliciting_index),
        author_sequence: Some(sequence.letters().to_string()),
        position: Some(position),
        cue_lag: Some(cue_lag),
    })))
}

/// Runs the full pipeline, handing each emitted instance to `emit` in
/// candidate order.
///
/// With `workers > 1` candidates of a page are processed concurrently but
/// accounted and emitted in page order, so the output is identical to a
/// single-worker run.
pub fn harvest<S, F>(source: &S, config: &HarvestConfig, mut emit: F) -> Result<HarvestReport, HarvestError>
where
    S: ConversationSource + ?Sized,
    F: FnMut(LabeledInstance) -> std::io::Result<()>,
{
    config.validate()?;
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| HarvestError::Workers(e.to_string()))?,
        )
    } else {
        None
    };

    let mut report = HarvestReport::default();
    let mut cue_counts: HashMap<String, usize> = HashMap::new();
    let mut cursor: Option<String> = None;
    let fail = |source: SourceError, report: &HarvestReport| HarvestError::Source {
        source,
        partial: Box::new(report.clone()),
    };

    'pages: loop {
        let page = match source.search_cues(&config.query, cursor.as_deref()) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, &report)),
        };

        let mut candidates = Vec::with_capacity(page.tweets.len());
        let mut budget_hit = false;
        for t in page.tweets {
            if !config.in_scope(&t) {
                report.out_of_scope += 1;
                continue;
            }
            if config.max_candidates.is_some_and(|m| report.fetched + candidates.len() >= m) {
                budget_hit = true;
                break;
            }
            candidates.push(t);
        }

        let outcomes: Vec<Result<Outcome, SourceError>> = match &pool {
            Some(pool) => pool
                .install(|| candidates.par_iter().map(|cue| process(source, cue, config.max_thread_length)).collect()),
            None => candidates.iter().map(|cue| process(source, cue, config.max_thread_length)).collect(),
        };

        for outcome in outcomes {
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    report.malformed_records = source.malformed_count();
                    return Err(fail(e, &report));
                }
            };
            report.fetched += 1;
            match outcome {
                Outcome::Unknown(reason) => {
                    report.unknown_skips += 1;
                    *report.unknown_by_reason.entry(reason.as_str().into()).or_default() += 1;
                }
                Outcome::Broken(reason) => {
                    report.broken_skips += 1;
                    *report.broken_by_reason.entry(reason.as_str().into()).or_default() += 1;
                }
                Outcome::NoMatch => report.nomatch_skips += 1,
                Outcome::Emit(instance) => {
                    let count = cue_counts.entry(instance.sarcastic_tweet.id.clone()).or_default();
                    *count += 1;
                    if config.dedup && *count > 1 {
                        report.dedup_skips += 1;
                        continue;
                    }
                    report.emitted += 1;
                    let person = instance.person.map(|p| p.to_string()).unwrap_or_default();
                    *report.emitted_by_person.entry(person).or_default() += 1;
                    emit(*instance)?;
                }
            }
        }

        cursor = page.next_cursor;
        if budget_hit || cursor.is_none() {
            break 'pages;
        }
    }

    report.multi_cue = cue_counts.into_iter().filter(|(_, n)| *n > 1).collect();
    report.malformed_records = source.malformed_count();
    Ok(report)
}

/// Convenience wrapper collecting every instance in memory.
pub fn harvest_all<S>(source: &S, config: &HarvestConfig) -> Result<(Vec<LabeledInstance>, HarvestReport), HarvestError>
where
    S: ConversationSource + ?Sized,
{
    let mut out = Vec::new();
    let report = harvest(source, config, |i| {
        out.push(i);
        Ok(())
    })?;
    Ok((out, report))
}

// ---------------------------------------------------------------------------
// Negatives

/// Sarcasm-related words and hashtags that disqualify a negative sample.
///
/// Entries starting with `#` match as case-folded substrings; other entries
/// match whole tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeLexicon {
    words: BTreeSet<String>,
    hashtags: BTreeSet<String>,
}

impl Default for NegativeLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON)
    }
}

impl NegativeLexicon {
    /// One entry per line; blank lines are ignored.
    pub fn parse(text: &str) -> Self {
        let mut lex = NegativeLexicon { words: BTreeSet::new(), hashtags: BTreeSet::new() };
        for entry in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let entry = entry.to_lowercase();
            if entry.starts_with('#') {
                lex.hashtags.insert(entry);
            } else {
                lex.words.insert(entry);
            }
        }
        lex
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty() && self.hashtags.is_empty()
    }

    pub fn matches(&self, text: &str) -> bool {
        let folded = text.to_lowercase();
        if self.hashtags.iter().any(|h| folded.contains(h.as_str())) {
            return true;
        }
        tokenize(text).iter().any(|t| self.words.contains(t))
    }
}

/// Samples `count` non-sarcastic tweets: not cue candidates, free of every
/// lexicon entry, and in `lang` when given.
///
/// Without a seed the first eligible tweets in source order are taken; with
/// a seed a uniform sample is drawn from all eligible tweets and returned in
/// source order.
pub fn sample_negatives<S>(
    source: &S,
    count: usize,
    lexicon: &NegativeLexicon,
    lang: Option<&str>,
    seed: Option<u64>,
) -> Result<Vec<LabeledInstance>, HarvestError>
where
    S: ConversationSource + ?Sized,
{
    if count == 0 {
        return Ok(Vec::new());
    }
    let eligible =
        |t: &Tweet| lang.is_none_or(|l| t.lang == l) && !is_cue_candidate(&t.text) && !lexicon.matches(&t.text);
    let mut pool = Vec::new();
    let mut cursor: Option<String> = None;
    loop {
        let page = source.scan(cursor.as_deref())?;
        pool.extend(page.tweets.into_iter().filter(|t| eligible(t)));
        if seed.is_none() && pool.len() >= count {
            break;
        }
        match page.next_cursor {
            Some(c) => cursor = Some(c),
            None => break,
        }
    }
    if pool.len() < count {
        return Err(HarvestError::InsufficientSupply { requested: count, available: pool.len() });
    }
    let chosen: Vec<Tweet> = match seed {
        None => pool.into_iter().take(count).collect(),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, pool.len(), count).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pool[i].clone()).collect()
        }
    };
    Ok(chosen.into_iter().map(LabeledInstance::negative).collect())
}

// ---------------------------------------------------------------------------
// Hashtag baseline

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub scanned: usize,
    pub kept: usize,
    pub first_day: Option<NaiveDate>,
    pub last_day: Option<NaiveDate>,
    /// Calendar days spanned by the scanned tweets, inclusive.
    pub days: usize,
    pub tweets_per_day: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashtagHarvest {
    pub tweets: Vec<Tweet>,
    pub report: RateReport,
}

fn normalize_tag(tag: &str) -> Option<String> {
    let tag = tag.trim().to_lowercase();
    let body = tag.trim_start_matches('#');
    (!body.is_empty()).then(|| format!("#{body}"))
}

/// True iff `text`, after trimming trailing whitespace and punctuation, ends
/// with one of `tags` (already normalized, lowercase with leading `#`).
pub fn ends_with_hashtag(text: &str, tags: &[String]) -> bool {
    let trimmed = text.trim_end_matches(|c: char| !(c.is_alphanumeric() || c == '_' || c == '#')).to_lowercase();
    tags.iter().any(|t| trimmed.ends_with(t.as_str()))
}

/// Collects tweets ending with one of `hashtags`, the distant-supervision
/// baseline, and reports the collection rate over the scanned span.
pub fn hashtag_harvest<S>(source: &S, hashtags: &[String]) -> Result<HashtagHarvest, HarvestError>
where
    S: ConversationSource + ?Sized,
{
    let tags: Vec<String> = hashtags.iter().filter_map(|t| normalize_tag(t)).collect();
    let mut kept = Vec::new();
    let mut scanned = 0usize;
    let mut first: Option<NaiveDate> = None;
    let mut last: Option<NaiveDate> = None;
    if !tags.is_empty() {
        let mut cursor: Option<String> = None;
        loop {
            let page = source.scan(cursor.as_deref())?;
            for t in page.tweets {
                scanned += 1;
                let day = t.created_at.date_naive();
                first = Some(first.map_or(day, |f| f.min(day)));
                last = Some(last.map_or(day, |l| l.max(day)));
                if ends_with_hashtag(&t.text, &tags) {
                    kept.push(t);
                }
            }
            match page.next_cursor {
                Some(c) => cursor = Some(c),
                None => break,
            }
        }
    }
    let days = match (first, last) {
        (Some(f), Some(l)) => (l - f).num_days() as usize + 1,
        _ => 0,
    };
    let tweets_per_day = if days == 0 { 0.0 } else { kept.len() as f64 / days as f64 };
    Ok(HashtagHarvest {
        report: RateReport { scanned, kept: kept.len(), first_day: first, last_day: last, days, tweets_per_day },
        tweets: kept,
    })
}
