//! Seeded synthetic conversations with planted ground truth, and a role
//! oracle that works by direct counting instead of pattern matching.
//!
//! The oracle shares no code with [`crate::matcher`]; the two are checked
//! against each other exhaustively in the test suites.

use std::io::{self, Write};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::RoleAssignment;
use crate::thread::{validate_thread, ConversationThread, PersonClass, Tweet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid template {template:?}: {detail}")]
    InvalidTemplate { template: String, detail: String },
    #[error("invalid mix: {0}")]
    InvalidMix(String),
}

/// Sarcastic / oblivious / eliciting positions derived straight from the
/// constraints each person class imposes on the author sequence.
pub fn oracle_roles(letters: &str, person: PersonClass) -> Option<RoleAssignment> {
    let seq = letters.as_bytes();
    if seq.first() != Some(&b'A') {
        return None;
    }
    let positions =
        |letter: u8| -> Vec<usize> { seq.iter().enumerate().filter(|(_, &c)| c == letter).map(|(i, _)| i).collect() };
    let only = |allowed: &[u8]| seq.iter().all(|c| allowed.contains(c));

    let (sarcastic, oblivious) = match person {
        PersonClass::First => {
            // Exactly one earlier tweet by the cue author.
            let a = positions(b'A');
            if a.len() != 2 {
                return None;
            }
            let s = a[1];
            // One tweet strictly between cue and sarcastic tweet.
            (s, (s == 2).then_some(1))
        }
        PersonClass::Second => {
            if !only(b"AB") {
                return None;
            }
            let b = positions(b'B');
            if b.len() != 1 {
                return None;
            }
            (b[0], None)
        }
        PersonClass::Third => {
            if !only(b"ABC") {
                return None;
            }
            let c = positions(b'C');
            if c.len() != 1 {
                return None;
            }
            let s = c[0];
            let bs_before: Vec<usize> = positions(b'B').into_iter().filter(|&i| i > 0 && i < s).collect();
            if bs_before.is_empty() {
                return None;
            }
            (s, (bs_before.len() == 1).then_some(bs_before[0]))
        }
        PersonClass::Unknown => return None,
    };

    Some(RoleAssignment {
        person,
        perspective: person.perspective()?,
        cue_index: 0,
        sarcastic_index: sarcastic,
        oblivious_index: oblivious,
        eliciting_index: (sarcastic + 1 < seq.len()).then_some(sarcastic + 1),
    })
}

// ---------------------------------------------------------------------------
// Text banks

/// Cue texts per person; each classifies to its person.
pub const FIRST_CUES: &[&str] = &[
    "I was only being sarcastic lol",
    "Shudda been more clear...I was being sarcastic",
    "I'm almost always being sarcastic, but this was real",
    "relax, I was just being sarcastic",
    "lol i was being sarcastic",
];

pub const SECOND_CUES: &[&str] = &[
    "Why are you being sarcastic?",
    "Take it you are being sarcastic",
    "are you being sarcastic right now",
    "wait, you're being sarcastic",
    "u being sarcastic again?",
];

pub const THIRD_CUES: &[&str] = &[
    "She was just being sarcastic!",
    "She was being sarcastic. You missed the joke",
    "Mind blown. Had no idea he was being sarcastic",
    "he was clearly being sarcastic",
    "pretty sure she's being sarcastic",
];

/// Non-cue texts free of sarcasm-related words.
pub const FILLERS: &[&str] = &[
    "what a great idea",
    "what time does the game start?",
    "I love mondays",
    "can't wait for the weekend",
    "this is the best coffee ever",
    "totally agree with you",
    "no way that happened",
    "my cat knocked over the plant again",
    "traffic was amazing this morning",
    "thanks for the update",
    "oh good, another meeting",
    "wow, you really nailed it",
];

fn cue_bank(person: PersonClass) -> &'static [&'static str] {
    match person {
        PersonClass::First => FIRST_CUES,
        PersonClass::Second => SECOND_CUES,
        PersonClass::Third => THIRD_CUES,
        PersonClass::Unknown => &[],
    }
}

// ---------------------------------------------------------------------------
// Planted threads

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// The author sequence does not pin down a unique sarcastic tweet.
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Truth {
    Matched(RoleAssignment),
    ExpectedDiscard(DiscardReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedThread {
    pub thread: ConversationThread,
    pub template: String,
    pub truth: Truth,
    pub planted_person: PersonClass,
}

impl PlantedThread {
    pub fn truth_record(&self) -> TruthRecord {
        let expected = match &self.truth {
            Truth::Matched(r) => Expected::Matched {
                person: r.person.number().unwrap_or(0),
                sarc_index: r.sarcastic_index,
                obl_index: r.oblivious_index,
                eli_index: r.eliciting_index,
            },
            Truth::ExpectedDiscard(reason) => Expected::Discard { discard_reason: *reason },
        };
        TruthRecord { thread_root_id: self.thread.root().id.clone(), expected }
    }

    /// Ids of (sarcastic, oblivious, eliciting) tweets for a matched truth.
    pub fn expected_ids(&self) -> Option<(String, Option<String>, Option<String>)> {
        let Truth::Matched(r) = &self.truth else { return None };
        let id = |i: usize| self.thread.tweets()[i].id.clone();
        Some((id(r.sarcastic_index), r.oblivious_index.map(id), r.eliciting_index.map(id)))
    }
}

/// One line of the truth file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub thread_root_id: String,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Matched { person: u8, sarc_index: usize, obl_index: Option<usize>, eli_index: Option<usize> },
    Discard { discard_reason: DiscardReason },
}

/// How to shape a generated thread.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    /// An explicit canonical author sequence, cue-first.
    Template(String),
    /// A random sequence that the person's pattern accepts.
    Random { max_len: usize },
}

fn check_template(template: &str) -> Result<(), SynthError> {
    let invalid = |detail: &str| SynthError::InvalidTemplate { template: template.to_string(), detail: detail.into() };
    if template.is_empty() {
        return Err(invalid("empty"));
    }
    if !template.starts_with('A') {
        return Err(invalid("must start with A"));
    }
    let mut next = b'A';
    for b in template.bytes() {
        if !b.is_ascii_uppercase() {
            return Err(invalid("letters must be A-Z"));
        }
        if b > next {
            return Err(invalid("letters must be introduced in alphabetical order"));
        }
        if b == next {
            next += 1;
        }
    }
    Ok(())
}

fn random_template(person: PersonClass, max_len: usize, rng: &mut ChaCha8Rng) -> Result<String, SynthError> {
    let min_len = if person == PersonClass::Third { 3 } else { 2 };
    if max_len < min_len {
        return Err(SynthError::InvalidTemplate {
            template: String::new(),
            detail: format!("max_len {max_len} too short for person {person}"),
        });
    }
    loop {
        let len = rng.gen_range(min_len..=max_len);
        let mut s = String::from("A");
        let mut used = 1u8;
        for _ in 1..len {
            // Bias toward few authors so matches are common.
            let pick = rng.gen_range(0..=used.min(3));
            if pick == used {
                used += 1;
            }
            s.push((b'A' + pick) as char);
        }
        if oracle_roles(&s, person).is_some() {
            return Ok(s);
        }
    }
}

fn build(
    person: PersonClass,
    template: &str,
    prefix: &str,
    thread_no: u64,
    rng: &mut ChaCha8Rng,
) -> Result<PlantedThread, SynthError> {
    check_template(template)?;
    let bank = cue_bank(person);
    if bank.is_empty() {
        return Err(SynthError::InvalidTemplate {
            template: template.to_string(),
            detail: "person must be 1, 2 or 3".into(),
        });
    }
    let n = template.len();
    let distinct = template.bytes().max().map_or(0, |m| (m - b'A') as usize + 1);
    let mut authors: Vec<String> = Vec::with_capacity(distinct);
    while authors.len() < distinct {
        let candidate = format!("user{}", rng.gen_range(0..1_000_000u32));
        if !authors.contains(&candidate) {
            authors.push(candidate);
        }
    }

    let base = Utc.with_ymd_and_hms(2019, 10, 1, 0, 0, 0).unwrap() + Duration::minutes((thread_no % 50_000) as i64);
    let id_at = |k: usize| format!("{prefix}.{}", n - 1 - k);
    let tweets: Vec<Tweet> = template
        .bytes()
        .enumerate()
        .map(|(k, letter)| {
            let depth = n - 1 - k;
            let text =
                if k == 0 { bank[rng.gen_range(0..bank.len())] } else { FILLERS[rng.gen_range(0..FILLERS.len())] };
            Tweet {
                id: id_at(k),
                parent_id: (k + 1 < n).then(|| id_at(k + 1)),
                author_id: authors[(letter - b'A') as usize].clone(),
                text: text.to_string(),
                created_at: base + Duration::seconds(depth as i64 * 37),
                lang: "en".to_string(),
            }
        })
        .collect();
    let thread = validate_thread(tweets).expect("generated chain is linked");
    let truth = match oracle_roles(template, person) {
        Some(r) => Truth::Matched(r),
        None => Truth::ExpectedDiscard(DiscardReason::NoMatch),
    };
    Ok(PlantedThread { thread, template: template.to_string(), truth, planted_person: person })
}

/// One thread shaped by `shape`, reproducible from `seed`.
pub fn generate_thread(person: PersonClass, shape: &Shape, seed: u64) -> Result<PlantedThread, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = match shape {
        Shape::Template(t) => t.clone(),
        Shape::Random { max_len } => random_template(person, *max_len, &mut rng)?,
    };
    build(person, &template, &format!("s{seed}"), 0, &mut rng)
}

/// `count` threads of one template and person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixEntry {
    pub template: String,
    /// 1, 2 or 3.
    pub person: u8,
    pub count: usize,
}

impl MixEntry {
    pub fn new(template: &str, person: u8, count: usize) -> Self {
        MixEntry { template: template.to_string(), person, count }
    }
}

/// Ten thousand threads split like the most common author patterns
/// observed in real cue threads.
pub fn default_mix() -> Vec<MixEntry> {
    vec![
        MixEntry::new("ABAC", 1, 2686),
        MixEntry::new("ABA", 1, 1719),
        MixEntry::new("ABAB", 1, 1466),
        MixEntry::new("AB", 2, 2006),
        MixEntry::new("ABA", 2, 739),
        MixEntry::new("ABC", 3, 1168),
        MixEntry::new("ABCB", 3, 112),
        MixEntry::new("ABAC", 3, 104),
    ]
}

/// Rewrites a template so that no pattern for `person` can match it.
fn make_ambiguous(template: &str, person: PersonClass) -> String {
    let mut t = template.to_string();
    match person {
        // A third tweet by the cue author.
        PersonClass::First => {
            while t.bytes().filter(|&b| b == b'A').count() < 3 {
                t.push('A');
            }
        }
        // A participant besides A and B.
        PersonClass::Second => {
            let next = t.bytes().max().unwrap_or(b'A') + 1;
            t.push(next as char);
        }
        // A second tweet by the sarcastic author.
        _ => {
            while t.bytes().filter(|&b| b == b'C').count() < 2 {
                if !t.contains('B') {
                    t.push('B');
                }
                t.push('C');
            }
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub threads: Vec<PlantedThread>,
}

impl SynthCorpus {
    pub fn tweets(&self) -> impl Iterator<Item = &Tweet> {
        // Root first within each thread, as they would be posted.
        self.threads.iter().flat_map(|p| p.thread.tweets().iter().rev())
    }

    pub fn write_corpus(&self, mut out: impl Write) -> io::Result<()> {
        for t in self.tweets() {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_truth(&self, mut out: impl Write) -> io::Result<()> {
        for p in &self.threads {
            serde_json::to_writer(&mut out, &p.truth_record())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Generates a shuffled corpus from `mix`. Exactly
/// `round(ambiguous_fraction * total)` threads are rewritten to violate
/// their pattern and carry a discard truth.
pub fn generate_corpus(mix: &[MixEntry], ambiguous_fraction: f64, seed: u64) -> Result<SynthCorpus, SynthError> {
    if !(0.0..=1.0).contains(&ambiguous_fraction) {
        return Err(SynthError::InvalidMix(format!("ambiguous fraction {ambiguous_fraction} outside [0, 1]")));
    }
    let mut slots: Vec<(String, PersonClass)> = Vec::new();
    for entry in mix {
        let person = PersonClass::from_number(entry.person)
            .ok_or_else(|| SynthError::InvalidMix(format!("person {} is not 1, 2 or 3", entry.person)))?;
        check_template(&entry.template)?;
        slots.extend(std::iter::repeat_n((entry.template.clone(), person), entry.count));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);
    let total = slots.len();
    let n_ambiguous = ((ambiguous_fraction * total as f64).round() as usize).min(total);
    let mut ambiguous = vec![false; total];
    for i in sample(&mut rng, total, n_ambiguous) {
        ambiguous[i] = true;
    }

    let mut threads = Vec::with_capacity(total);
    for (i, (template, person)) in slots.into_iter().enumerate() {
        let template = if ambiguous[i] { make_ambiguous(&template, person) } else { template };
        let planted = build(person, &template, &format!("th{i:06}"), i as u64, &mut rng)?;
        if ambiguous[i] {
            debug_assert!(matches!(planted.truth, Truth::ExpectedDiscard(_)));
        }
        threads.push(planted);
    }
    Ok(SynthCorpus { threads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cue::classify_cue;
    use crate::sequence::canonicalize;

    fn roles(seq: &str, p: PersonClass) -> Option<(usize, Option<usize>, Option<usize>)> {
        oracle_roles(seq, p).map(|r| (r.sarcastic_index, r.oblivious_index, r.eliciting_index))
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(roles("ABAC", PersonClass::First), Some((2, Some(1), Some(3))));
        assert_eq!(roles("AAB", PersonClass::Third), None);
        assert_eq!(roles("AABC", PersonClass::Third), Some((3, Some(2), None)));
        assert_eq!(roles("BA", PersonClass::Second), None);
        assert_eq!(roles("AB", PersonClass::Unknown), None);
    }

    #[test]
    fn cue_banks_classify_to_their_person() {
        for p in PersonClass::KNOWN {
            for text in cue_bank(p) {
                assert_eq!(classify_cue(text).person, p, "{text}");
            }
        }
        for text in FILLERS {
            assert!(!crate::cue::is_cue_candidate(text));
            assert!(!crate::pipeline::NegativeLexicon::default().matches(text), "{text}");
        }
    }

    #[test]
    fn planted_first_person() {
        let p = generate_thread(PersonClass::First, &Shape::Template("ABAC".into()), 7).unwrap();
        assert_eq!(canonicalize(&p.thread).unwrap().letters(), "ABAC");
        assert_eq!(classify_cue(&p.thread.cue().text).person, PersonClass::First);
        assert!(matches!(p.truth, Truth::Matched(r) if r.sarcastic_index == 2));
    }

    #[test]
    fn planted_third_person() {
        let p = generate_thread(PersonClass::Third, &Shape::Template("ABC".into()), 1).unwrap();
        let Truth::Matched(r) = p.truth else { panic!() };
        assert_eq!((r.sarcastic_index, r.oblivious_index), (2, Some(1)));
    }

    #[test]
    fn invalid_templates() {
        for bad in ["BAC", "", "ACB", "AbC"] {
            assert!(matches!(
                generate_thread(PersonClass::First, &Shape::Template(bad.into()), 3),
                Err(SynthError::InvalidTemplate { .. })
            ));
        }
    }

    #[test]
    fn random_shapes_match() {
        for seed in 0..50 {
            for p in PersonClass::KNOWN {
                let t = generate_thread(p, &Shape::Random { max_len: 6 }, seed).unwrap();
                assert!(matches!(t.truth, Truth::Matched(_)), "{p:?} {}", t.template);
                assert!(t.template.len() <= 6);
            }
        }
    }

    #[test]
    fn ambiguity_rewrites_never_match() {
        for entry in default_mix() {
            let p = PersonClass::from_number(entry.person).unwrap();
            let t = make_ambiguous(&entry.template, p);
            assert!(oracle_roles(&t, p).is_none(), "{t}");
            check_template(&t).unwrap();
        }
        assert_eq!(make_ambiguous("ABC", PersonClass::Third), "ABCC");
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let mix = vec![MixEntry::new("ABAC", 1, 100)];
        let c = generate_corpus(&mix, 0.0, 42).unwrap();
        assert_eq!(c.threads.len(), 100);
        assert!(c.threads.iter().all(|t| matches!(t.truth, Truth::Matched(_))));

        let all = generate_corpus(&mix, 1.0, 42).unwrap();
        assert!(all.threads.iter().all(|t| matches!(t.truth, Truth::ExpectedDiscard(_))));

        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_corpus(&default_mix()[..3], 0.3, 5).unwrap().write_corpus(&mut a).unwrap();
        generate_corpus(&default_mix()[..3], 0.3, 5).unwrap().write_corpus(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(generate_corpus(&mix, 1.5, 1).is_err());
        assert!(generate_corpus(&[MixEntry::new("AB", 4, 1)], 0.0, 1).is_err());
    }

    #[test]
    fn truth_record_shape() {
        let p = generate_thread(PersonClass::Second, &Shape::Template("AB".into()), 2).unwrap();
        let v = serde_json::to_value(p.truth_record()).unwrap();
        assert_eq!(v["expected"]["sarc_index"], 1);
        assert_eq!(v["expected"]["obl_index"], serde_json::Value::Null);
        let d = generate_thread(PersonClass::Second, &Shape::Template("ABC".into()), 2).unwrap();
        let v = serde_json::to_value(d.truth_record()).unwrap();
        assert_eq!(v["expected"]["discard_reason"], "no_match");
        let back: TruthRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, d.truth_record());
    }
}
