//! Corpus statistics over a harvested dataset.
//!
//! Everything is computed from a [`StatsAccumulator`], which only holds sums
//! and counts: accumulators over disjoint inputs merge exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::pipeline::{DatasetRecord, Label};
use crate::thread::{PersonClass, Perspective};

/// Cue-lag buckets: 1, 2, 3+.
pub const LAG_BUCKETS: [&str; 3] = ["1", "2", "3+"];
/// Position buckets: 0..4, 5+.
pub const POSITION_BUCKETS: [&str; 6] = ["0", "1", "2", "3", "4", "5+"];

pub const OTHER: &str = "Other";

/// Header line describing how word counts are measured.
pub const WORD_COUNT_DEFINITION: &str = "word count = whitespace tokens after removing URLs and @mentions";

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no sarcastic instances to aggregate")]
    EmptyInput,
    #[error("line {line}: {detail}")]
    BadRecord { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoleCounts {
    pub sarcastic: usize,
    pub oblivious: usize,
    pub eliciting: usize,
}

impl RoleCounts {
    fn add(&mut self, other: RoleCounts) {
        self.sarcastic += other.sarcastic;
        self.oblivious += other.oblivious;
        self.eliciting += other.eliciting;
    }

    fn of(record: &DatasetRecord) -> RoleCounts {
        RoleCounts {
            sarcastic: 1,
            oblivious: record.obl_id.is_some() as usize,
            eliciting: record.eli_id.is_some() as usize,
        }
    }
}

/// Mergeable aggregation state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    person: BTreeMap<PersonClass, RoleCounts>,
    patterns: BTreeMap<(PersonClass, String), RoleCounts>,
    /// `[lag bucket][position bucket]`
    cells: [[usize; 6]; 3],
    sarcastic: usize,
    thread_length_sum: usize,
    cue_lag_sum: usize,
    /// perspective → (root tweets, all tweets)
    roots: BTreeMap<Perspective, (usize, usize)>,
    word_counts: BTreeMap<String, BTreeMap<usize, usize>>,
    negatives: usize,
}

fn lag_bucket(lag: usize) -> usize {
    lag.clamp(1, 3) - 1
}

fn position_bucket(position: usize) -> usize {
    position.min(5)
}

/// Whitespace tokens left after dropping URLs and user mentions.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| {
            let lw = w.to_ascii_lowercase();
            !(lw.starts_with("http://") || lw.starts_with("https://") || lw.starts_with("www.") || w.starts_with('@'))
        })
        .count()
}

fn word_group(record: &DatasetRecord) -> &'static str {
    match (record.label, record.perspective) {
        (Label::NonSarcastic, _) => "non_sarcastic",
        (Label::Sarcastic, Some(Perspective::Intended)) => "intended",
        (Label::Sarcastic, Some(Perspective::Perceived)) => "perceived",
        (Label::Sarcastic, None) => "sarcastic",
    }
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Self {
        let mut acc = Self::new();
        for r in records {
            acc.add(r);
        }
        acc
    }

    pub fn add(&mut self, record: &DatasetRecord) {
        *self
            .word_counts
            .entry(word_group(record).to_string())
            .or_default()
            .entry(word_count(&record.sar_text))
            .or_default() += 1;

        if record.label == Label::NonSarcastic {
            self.negatives += 1;
            return;
        }
        let Some(person) = record.person_class() else { return };
        let roles = RoleCounts::of(record);
        self.person.entry(person).or_default().add(roles);
        if let Some(seq) = &record.author_sequence {
            self.patterns.entry((person, seq.clone())).or_default().add(roles);
        }
        if let (Some(position), Some(lag), Some(seq)) = (record.position, record.cue_lag, &record.author_sequence) {
            self.cells[lag_bucket(lag)][position_bucket(position)] += 1;
            self.sarcastic += 1;
            self.thread_length_sum += seq.len();
            self.cue_lag_sum += lag;
            let perspective = record.perspective.or(person.perspective());
            if let Some(p) = perspective {
                let slot = self.roots.entry(p).or_default();
                slot.0 += (position == 0) as usize;
                slot.1 += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        for (k, v) in &other.person {
            self.person.entry(*k).or_default().add(*v);
        }
        for (k, v) in &other.patterns {
            self.patterns.entry(k.clone()).or_default().add(*v);
        }
        for (row, other_row) in self.cells.iter_mut().zip(other.cells.iter()) {
            for (c, o) in row.iter_mut().zip(other_row.iter()) {
                *c += o;
            }
        }
        self.sarcastic += other.sarcastic;
        self.thread_length_sum += other.thread_length_sum;
        self.cue_lag_sum += other.cue_lag_sum;
        for (k, (r, t)) in &other.roots {
            let slot = self.roots.entry(*k).or_default();
            slot.0 += r;
            slot.1 += t;
        }
        for (group, hist) in &other.word_counts {
            let mine = self.word_counts.entry(group.clone()).or_default();
            for (wc, n) in hist {
                *mine.entry(*wc).or_default() += n;
            }
        }
        self.negatives += other.negatives;
    }

    pub fn person_breakdown(&self) -> PersonBreakdown {
        let mut total = RoleCounts::default();
        for c in self.person.values() {
            total.add(*c);
        }
        PersonBreakdown { rows: self.person.iter().map(|(p, c)| (*p, *c)).collect(), total }
    }

    pub fn pattern_histogram(&self, top_k: usize) -> PatternHistogram {
        let mut classes = Vec::new();
        for person in PersonClass::KNOWN {
            let mut rows: Vec<PatternRow> = self
                .patterns
                .iter()
                .filter(|((p, _), _)| *p == person)
                .map(|((_, seq), counts)| PatternRow { pattern: seq.clone(), counts: *counts })
                .collect();
            if rows.is_empty() {
                continue;
            }
            rows.sort_by(|a, b| b.counts.sarcastic.cmp(&a.counts.sarcastic).then_with(|| a.pattern.cmp(&b.pattern)));
            let mut subtotal = RoleCounts::default();
            for r in &rows {
                subtotal.add(r.counts);
            }
            if rows.len() > top_k {
                let mut other = RoleCounts::default();
                for r in rows.drain(top_k..) {
                    other.add(r.counts);
                }
                rows.push(PatternRow { pattern: OTHER.to_string(), counts: other });
            }
            classes.push(ClassPatterns { person, perspective: person.perspective(), rows, subtotal });
        }
        let mut total = RoleCounts::default();
        for c in &classes {
            total.add(c.subtotal);
        }
        PatternHistogram { classes, total }
    }

    pub fn position_lag_matrix(&self) -> Result<PositionLagMatrix, StatsError> {
        let total = self.sarcastic;
        if total == 0 {
            return Err(StatsError::EmptyInput);
        }
        let pct = |n: usize| round_percent(n, total);
        let mut percent = [[0.0; 6]; 3];
        let mut lag_totals = [0usize; 3];
        let mut position_totals = [0usize; 6];
        for (l, row) in self.cells.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                percent[l][p] = pct(n);
                lag_totals[l] += n;
                position_totals[p] += n;
            }
        }
        Ok(PositionLagMatrix {
            counts: self.cells,
            total,
            percent,
            lag_percent: lag_totals.map(pct),
            position_percent: position_totals.map(pct),
        })
    }

    pub fn corpus_summary(&self) -> Result<CorpusSummary, StatsError> {
        if self.sarcastic == 0 {
            return Err(StatsError::EmptyInput);
        }
        let n = self.sarcastic as f64;
        Ok(CorpusSummary {
            sarcastic_instances: self.sarcastic,
            negative_instances: self.negatives,
            mean_thread_length: self.thread_length_sum as f64 / n,
            mean_cue_lag: self.cue_lag_sum as f64 / n,
            root_fraction: self
                .roots
                .iter()
                .map(|(p, (roots, all))| (p.as_str().to_string(), *roots as f64 / *all as f64))
                .collect(),
            word_count_definition: WORD_COUNT_DEFINITION.to_string(),
            word_count_histogram: self.word_counts.clone(),
        })
    }

    pub fn finish(&self, top_k: usize) -> CorpusStats {
        CorpusStats {
            person_breakdown: self.person_breakdown(),
            pattern_histogram: self.pattern_histogram(top_k),
            position_lag_matrix: self.position_lag_matrix().ok(),
            summary: self.corpus_summary().ok(),
        }
    }
}

/// `100 * count / total` rounded half-up to one decimal, in exact integer
/// arithmetic.
pub fn round_percent(count: usize, total: usize) -> f64 {
    let tenths = (2000 * count as u128 + total as u128) / (2 * total as u128);
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonBreakdown {
    pub rows: Vec<(PersonClass, RoleCounts)>,
    pub total: RoleCounts,
}

impl PersonBreakdown {
    pub fn get(&self, person: PersonClass) -> RoleCounts {
        self.rows.iter().find(|(p, _)| *p == person).map(|(_, c)| *c).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternRow {
    pub pattern: String,
    pub counts: RoleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPatterns {
    pub person: PersonClass,
    pub perspective: Option<Perspective>,
    pub rows: Vec<PatternRow>,
    pub subtotal: RoleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternHistogram {
    pub classes: Vec<ClassPatterns>,
    pub total: RoleCounts,
}

impl PatternHistogram {
    pub fn class(&self, person: PersonClass) -> Option<&ClassPatterns> {
        self.classes.iter().find(|c| c.person == person)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionLagMatrix {
    /// Raw counts, `[lag bucket][position bucket]`.
    pub counts: [[usize; 6]; 3],
    pub total: usize,
    pub percent: [[f64; 6]; 3],
    pub lag_percent: [f64; 3],
    pub position_percent: [f64; 6],
}

impl PositionLagMatrix {
    /// Percentage at cue lag `lag` (≥ 1) and position `position`.
    pub fn cell(&self, lag: usize, position: usize) -> f64 {
        self.percent[lag_bucket(lag)][position_bucket(position)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub sarcastic_instances: usize,
    pub negative_instances: usize,
    pub mean_thread_length: f64,
    pub mean_cue_lag: f64,
    /// Fraction of sarcastic tweets that are root tweets, per perspective.
    pub root_fraction: BTreeMap<String, f64>,
    pub word_count_definition: String,
    /// group (`intended`, `perceived`, `non_sarcastic`) → word count → tweets
    pub word_count_histogram: BTreeMap<String, BTreeMap<usize, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub person_breakdown: PersonBreakdown,
    pub pattern_histogram: PatternHistogram,
    pub position_lag_matrix: Option<PositionLagMatrix>,
    pub summary: Option<CorpusSummary>,
}

pub fn person_breakdown(records: &[DatasetRecord]) -> PersonBreakdown {
    StatsAccumulator::from_records(records).person_breakdown()
}

pub fn pattern_histogram(records: &[DatasetRecord], top_k: usize) -> PatternHistogram {
    StatsAccumulator::from_records(records).pattern_histogram(top_k)
}

pub fn position_lag_matrix(records: &[DatasetRecord]) -> Result<PositionLagMatrix, StatsError> {
    StatsAccumulator::from_records(records).position_lag_matrix()
}

pub fn corpus_summary(records: &[DatasetRecord]) -> Result<CorpusSummary, StatsError> {
    StatsAccumulator::from_records(records).corpus_summary()
}

/// Reads a JSON Lines dataset, skipping blank lines.
pub fn read_records(reader: impl BufRead) -> Result<Vec<DatasetRecord>, StatsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec =
            serde_json::from_str(&line).map_err(|e| StatsError::BadRecord { line: i + 1, detail: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

fn person_label(p: PersonClass) -> &'static str {
    match p {
        PersonClass::First => "1st",
        PersonClass::Second => "2nd",
        PersonClass::Third => "3rd",
        PersonClass::Unknown => "unknown",
    }
}

fn dash(n: usize) -> String {
    if n == 0 {
        "—".to_string()
    } else {
        n.to_string()
    }
}

/// Plain-text report with the person breakdown, pattern table, and
/// position × lag matrix.
pub fn render_text(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {WORD_COUNT_DEFINITION}");
    let _ = writeln!(out, "# percentages rounded half-up to one decimal");
    let _ = writeln!(out);

    let _ = writeln!(out, "Person breakdown");
    let _ =
        writeln!(out, "{:<8}{:<12}{:>10}{:>10}{:>10}", "Person", "Perspective", "Sarcastic", "Oblivious", "Eliciting");
    for (p, c) in &stats.person_breakdown.rows {
        let persp = p.perspective().map(Perspective::as_str).unwrap_or("-");
        let _ = writeln!(
            out,
            "{:<8}{:<12}{:>10}{:>10}{:>10}",
            person_label(*p),
            persp,
            c.sarcastic,
            dash(c.oblivious),
            dash(c.eliciting)
        );
    }
    let t = stats.person_breakdown.total;
    let _ = writeln!(out, "{:<20}{:>10}{:>10}{:>10}", "Total", t.sarcastic, t.oblivious, t.eliciting);
    let _ = writeln!(out);

    let _ = writeln!(out, "Author patterns");
    let _ = writeln!(out, "{:<8}{:<12}{:>10}{:>10}{:>10}", "Person", "Pattern", "Sarcast.", "Obliv.", "Elicit.");
    for class in &stats.pattern_histogram.classes {
        for (i, row) in class.rows.iter().enumerate() {
            let who = if i == 0 { person_label(class.person) } else { "" };
            let c = row.counts;
            let _ = writeln!(
                out,
                "{:<8}{:<12}{:>10}{:>10}{:>10}",
                who,
                row.pattern,
                c.sarcastic,
                dash(c.oblivious),
                dash(c.eliciting)
            );
        }
        let s = class.subtotal;
        let _ = writeln!(
            out,
            "{:<8}{:<12}{:>10}{:>10}{:>10}",
            "",
            "Subtotal",
            s.sarcastic,
            dash(s.oblivious),
            dash(s.eliciting)
        );
    }
    let t = stats.pattern_histogram.total;
    let _ = writeln!(out, "{:<20}{:>10}{:>10}{:>10}", "Total", t.sarcastic, t.oblivious, t.eliciting);
    let _ = writeln!(out);

    if let Some(m) = &stats.position_lag_matrix {
        let _ = writeln!(out, "% of sarcastic tweets by cue lag (rows) and position (columns)");
        let _ = write!(out, "{:<8}", "Lag");
        for p in POSITION_BUCKETS {
            let _ = write!(out, "{p:>7}");
        }
        let _ = writeln!(out, "{:>8}", "Total");
        for (l, lag) in LAG_BUCKETS.iter().enumerate() {
            let _ = write!(out, "{lag:<8}");
            for v in m.percent[l] {
                let _ = write!(out, "{v:>7.1}");
            }
            let _ = writeln!(out, "{:>8.1}", m.lag_percent[l]);
        }
        let _ = write!(out, "{:<8}", "Total");
        for v in m.position_percent {
            let _ = write!(out, "{v:>7.1}");
        }
        let _ = writeln!(out, "{:>8.1}", 100.0);
        let _ = writeln!(out);
    }

    if let Some(s) = &stats.summary {
        let _ = writeln!(out, "sarcastic_instances: {}", s.sarcastic_instances);
        let _ = writeln!(out, "negative_instances: {}", s.negative_instances);
        let _ = writeln!(out, "mean_thread_length: {:.3}", s.mean_thread_length);
        let _ = writeln!(out, "mean_cue_lag: {:.3}", s.mean_cue_lag);
        for (p, f) in &s.root_fraction {
            let _ = writeln!(out, "root_fraction.{p}: {f:.3}");
        }
        for (group, hist) in &s.word_count_histogram {
            let cells: Vec<String> = hist.iter().map(|(wc, n)| format!("{wc}:{n}")).collect();
            let _ = writeln!(out, "word_counts.{group}: {}", cells.join(" "));
        }
    }
    out
}
