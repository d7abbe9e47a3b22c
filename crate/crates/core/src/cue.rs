//! Cue detection and grammatical-person classification.
//!
//! The classifier is precision-oriented: anything it cannot attribute to a
//! single subject pronoun comes back as [`PersonClass::Unknown`] with a
//! reason, and the harvester drops it.

use serde::Serialize;

use crate::thread::PersonClass;

/// The search phrase that marks a cue candidate.
pub const QUERY_PHRASE: &str = "being sarcastic";

/// Tokens inspected before the phrase when looking for the subject.
pub const SUBJECT_WINDOW: usize = 4;

/// Tokens inspected before the phrase when looking for negation.
pub const NEGATION_WINDOW: usize = 2;

const FIRST: &[&str] = &["i", "i'm", "im", "i've", "i'd"];
const SECOND: &[&str] = &["you", "u", "ya", "you're", "ur"];
const THIRD: &[&str] = &["she", "he", "s/he", "she's", "he's"];
const PLURAL: &[&str] = &["we", "they", "y'all", "we're", "they're"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CueReason {
    Classified,
    NoPronoun,
    MultiplePronouns,
    NegationPresent,
    MentionSubject,
    PluralPronoun,
    NoQueryPhrase,
}

impl CueReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CueReason::Classified => "classified",
            CueReason::NoPronoun => "no_pronoun",
            CueReason::MultiplePronouns => "multiple_pronouns",
            CueReason::NegationPresent => "negation_present",
            CueReason::MentionSubject => "mention_subject",
            CueReason::PluralPronoun => "plural_pronoun",
            CueReason::NoQueryPhrase => "no_query_phrase",
        }
    }
}

/// Outcome of [`classify_cue`]. `person` is `Unknown` exactly when `reason`
/// is not `Classified`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CueDecision {
    pub person: PersonClass,
    /// The token that decided (or vetoed) the class, lowercased.
    pub matched_pronoun: Option<String>,
    pub reason: CueReason,
}

impl CueDecision {
    fn unknown(reason: CueReason, token: Option<&str>) -> Self {
        CueDecision { person: PersonClass::Unknown, matched_pronoun: token.map(str::to_string), reason }
    }
}

/// True iff the case-folded, whitespace-collapsed text contains the query
/// phrase.
pub fn is_cue_candidate(text: &str) -> bool {
    contains_phrase(text, QUERY_PHRASE)
}

/// Case-insensitive, whitespace-insensitive substring test.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let phrase = normalize(phrase);
    !phrase.is_empty() && normalize(text).contains(&phrase)
}

fn normalize(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Lowercased tokens. Runs of word characters form one token (apostrophes,
/// `/`, `@`, `#` and `_` count as word characters so that contractions,
/// `s/he`, mentions and hashtags survive); every other non-space character
/// is a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        let trimmed = word.trim_matches(|c| c == '\'' || c == '/');
        if !trimmed.is_empty() {
            tokens.push(trimmed.to_string());
        }
        word.clear();
    };
    for c in text.chars().flat_map(char::to_lowercase) {
        let c = if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c };
        if c.is_alphanumeric() || matches!(c, '\'' | '/' | '@' | '#' | '_') {
            word.push(c);
        } else {
            flush(&mut word, &mut tokens);
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Subject {
    Singular(PersonClass),
    Plural,
    Mention,
}

fn subject_kind(token: &str) -> Option<Subject> {
    if FIRST.contains(&token) {
        Some(Subject::Singular(PersonClass::First))
    } else if SECOND.contains(&token) {
        Some(Subject::Singular(PersonClass::Second))
    } else if THIRD.contains(&token) {
        Some(Subject::Singular(PersonClass::Third))
    } else if PLURAL.contains(&token) {
        Some(Subject::Plural)
    } else if token.len() > 1 && token.starts_with('@') {
        Some(Subject::Mention)
    } else {
        None
    }
}

fn is_negation(token: &str) -> bool {
    token == "not" || token == "never" || token.ends_with("n't")
}

/// Index of the first `being` that is followed by a `sarcastic…` token.
fn phrase_start(tokens: &[String]) -> Option<usize> {
    tokens.windows(2).position(|w| w[0] == "being" && w[1].starts_with("sarcastic"))
}

/// Classifies a cue by the subject of its first "being sarcastic".
pub fn classify_cue(text: &str) -> CueDecision {
    if !is_cue_candidate(text) {
        return CueDecision::unknown(CueReason::NoQueryPhrase, None);
    }
    let tokens = tokenize(text);
    let Some(at) = phrase_start(&tokens) else {
        return CueDecision::unknown(CueReason::NoQueryPhrase, None);
    };

    let negation_zone = &tokens[at.saturating_sub(NEGATION_WINDOW)..at];
    if let Some(neg) = negation_zone.iter().find(|t| is_negation(t)) {
        return CueDecision::unknown(CueReason::NegationPresent, Some(neg));
    }

    let window = &tokens[at.saturating_sub(SUBJECT_WINDOW)..at];
    // Nearest first.
    let subjects: Vec<(&str, Subject)> =
        window.iter().rev().filter_map(|t| subject_kind(t).map(|k| (t.as_str(), k))).collect();

    let Some(&(token, nearest)) = subjects.first() else {
        return CueDecision::unknown(CueReason::NoPronoun, None);
    };
    match nearest {
        Subject::Mention => CueDecision::unknown(CueReason::MentionSubject, Some(token)),
        Subject::Plural => CueDecision::unknown(CueReason::PluralPronoun, Some(token)),
        Subject::Singular(person) => {
            let conflicting = subjects
                .iter()
                .any(|(_, k)| matches!(k, Subject::Singular(p) if *p != person) || *k == Subject::Plural);
            if conflicting {
                CueDecision::unknown(CueReason::MultiplePronouns, Some(token))
            } else {
                CueDecision { person, matched_pronoun: Some(token.to_string()), reason: CueReason::Classified }
            }
        }
    }
}
