//! Per-person author-sequence patterns and role extraction.
//!
//! Each person class has one anchored pattern over the canonical letter
//! string. The capture groups locate the cue, the sarcastic tweet, and the
//! zones that may hold the oblivious and eliciting tweets.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::thread::{PersonClass, Perspective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupRole {
    Cue,
    ObliviousZone,
    Sarcastic,
    ElicitingZone,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolePattern {
    pub person: PersonClass,
    pub pattern_source: &'static str,
    /// Role of capture group `i + 1`.
    pub group_roles: &'static [GroupRole],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("no pattern exists for person class {0:?}")]
    UnknownPerson(PersonClass),
}

/// Indices are cue-first positions in the author sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoleAssignment {
    pub person: PersonClass,
    pub perspective: Perspective,
    pub cue_index: usize,
    pub sarcastic_index: usize,
    pub oblivious_index: Option<usize>,
    pub eliciting_index: Option<usize>,
}

use GroupRole::*;

const FIRST: RolePattern = RolePattern {
    person: PersonClass::First,
    pattern_source: "^(A)([^A]*)(A)([^A]*)$",
    group_roles: &[Cue, ObliviousZone, Sarcastic, ElicitingZone],
};

const SECOND: RolePattern = RolePattern {
    person: PersonClass::Second,
    pattern_source: "^(A)A*(B)(A*)$",
    group_roles: &[Cue, Sarcastic, ElicitingZone],
};

const THIRD: RolePattern = RolePattern {
    person: PersonClass::Third,
    pattern_source: "^(A)(A*B[AB]*)(C)([AB]*)$",
    group_roles: &[Cue, ObliviousZone, Sarcastic, ElicitingZone],
};

static COMPILED: LazyLock<[Regex; 3]> =
    LazyLock::new(|| [FIRST, SECOND, THIRD].map(|p| Regex::new(p.pattern_source).expect("static pattern compiles")));

pub fn pattern_for(person: PersonClass) -> Result<RolePattern, MatchError> {
    match person {
        PersonClass::First => Ok(FIRST),
        PersonClass::Second => Ok(SECOND),
        PersonClass::Third => Ok(THIRD),
        PersonClass::Unknown => Err(MatchError::UnknownPerson(person)),
    }
}

fn compiled(person: PersonClass) -> Option<&'static Regex> {
    let idx = match person {
        PersonClass::First => 0,
        PersonClass::Second => 1,
        PersonClass::Third => 2,
        PersonClass::Unknown => return None,
    };
    Some(&COMPILED[idx])
}

/// Matches a letter sequence against the pattern for `person`.
///
/// Returns `None` when the sequence does not match, which means the
/// sarcastic tweet cannot be pinpointed and the thread is discarded. Also
/// `None` for [`PersonClass::Unknown`].
pub fn match_roles(letters: &str, person: PersonClass) -> Option<RoleAssignment> {
    let pattern = pattern_for(person).ok()?;
    let caps = compiled(person)?.captures(letters)?;

    let mut sarcastic = None;
    let mut oblivious_zone = None;
    let mut eliciting_zone = None;
    for (i, role) in pattern.group_roles.iter().enumerate() {
        let Some(m) = caps.get(i + 1) else { continue };
        match role {
            Cue => debug_assert_eq!(m.start(), 0),
            Sarcastic => sarcastic = Some(m.start()),
            ObliviousZone => oblivious_zone = Some(m),
            ElicitingZone => eliciting_zone = Some(m),
        }
    }
    let sarcastic_index = sarcastic?;

    let oblivious_index = oblivious_zone.and_then(|zone| match person {
        // A lone tweet between cue and sarcastic tweet.
        PersonClass::First => (zone.len() == 1).then_some(zone.start()),
        // The single B in the zone, wherever it sits.
        PersonClass::Third => {
            let mut bs = zone.as_str().match_indices('B');
            match (bs.next(), bs.next()) {
                (Some((offset, _)), None) => Some(zone.start() + offset),
                _ => None,
            }
        }
        _ => None,
    });

    let eliciting_index = eliciting_zone.filter(|zone| !zone.is_empty()).map(|_| sarcastic_index + 1);

    Some(RoleAssignment {
        person,
        perspective: person.perspective()?,
        cue_index: 0,
        sarcastic_index,
        oblivious_index,
        eliciting_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles(seq: &str, p: u8) -> Option<(usize, Option<usize>, Option<usize>)> {
        match_roles(seq, PersonClass::from_number(p).unwrap())
            .map(|r| (r.sarcastic_index, r.oblivious_index, r.eliciting_index))
    }

    #[test]
    fn pattern_text() {
        assert_eq!(pattern_for(PersonClass::First).unwrap().pattern_source, "^(A)([^A]*)(A)([^A]*)$");
        assert_eq!(pattern_for(PersonClass::Second).unwrap().pattern_source, "^(A)A*(B)(A*)$");
        assert_eq!(pattern_for(PersonClass::Third).unwrap().pattern_source, "^(A)(A*B[AB]*)(C)([AB]*)$");
        assert_eq!(pattern_for(PersonClass::Unknown).unwrap_err(), MatchError::UnknownPerson(PersonClass::Unknown));
        for p in PersonClass::KNOWN {
            let pat = pattern_for(p).unwrap();
            let groups = Regex::new(pat.pattern_source).unwrap().captures_len() - 1;
            assert_eq!(groups, pat.group_roles.len());
        }
    }

    #[test]
    fn role_goldens() {
        assert_eq!(roles("ABAC", 1), Some((2, Some(1), Some(3))));
        assert_eq!(roles("ABA", 1), Some((2, Some(1), None)));
        assert_eq!(roles("AB", 2), Some((1, None, None)));
        assert_eq!(roles("ABA", 2), Some((1, None, Some(2))));
        assert_eq!(roles("ABC", 3), Some((2, Some(1), None)));
        assert_eq!(roles("ABCB", 3), Some((2, Some(1), Some(3))));
        assert_eq!(roles("ABAC", 3), Some((3, Some(1), None)));
        assert_eq!(roles("ABAA", 1), None);
        assert_eq!(roles("ABCA", 1), Some((3, None, None)));
        assert_eq!(roles("ABABC", 3), Some((4, None, None)));
    }

    #[test]
    fn degenerate() {
        for p in 1..=3 {
            assert_eq!(roles("A", p), None);
            assert_eq!(roles("", p), None);
        }
        assert_eq!(roles("AA", 1), Some((1, None, None)));
        assert!(match_roles("AB", PersonClass::Unknown).is_none());
    }

    #[test]
    fn perspective_follows_person() {
        assert_eq!(match_roles("ABA", PersonClass::First).unwrap().perspective, Perspective::Intended);
        assert_eq!(match_roles("ABA", PersonClass::Second).unwrap().perspective, Perspective::Perceived);
        assert_eq!(match_roles("ABC", PersonClass::Third).unwrap().perspective, Perspective::Perceived);
    }
}
