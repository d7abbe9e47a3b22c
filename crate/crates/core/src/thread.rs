//! Tweets, reply-chain threads, and the person/perspective vocabulary.

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One utterance in a conversation.
///
/// Field names are the JSON Lines corpus schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    /// Id of the tweet this one replies to; `None` for a root tweet.
    pub parent_id: Option<String>,
    pub author_id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub lang: String,
}

impl Tweet {
    pub fn is_root(&self) -> bool {
        self.parent_id.is_none()
    }

    /// Checks the per-record invariants a source must enforce before handing
    /// a tweet to the pipeline.
    pub fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.author_id.is_empty() {
            return Err(format!("tweet {}: empty author_id", self.id));
        }
        match self.parent_id.as_deref() {
            Some("") => Err(format!("tweet {}: empty parent_id", self.id)),
            Some(p) if p == self.id => Err(format!("tweet {}: replies to itself", self.id)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThreadError {
    #[error("thread is empty")]
    Empty,
    #[error("broken reply chain at index {index}: {detail}")]
    BrokenChain { index: usize, detail: String },
    #[error("reply cycle through tweet {id}")]
    CycleDetected { id: String },
    #[error("duplicate tweet id {id}")]
    DuplicateId { id: String },
}

/// A validated reply chain stored cue-first: index 0 is the most recent tweet
/// (the cue candidate), the last element is the root.
///
/// Index `k` in the chain is also index `k` in the author sequence, so the
/// sarcastic tweet's index is its cue lag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversationThread {
    tweets: Vec<Tweet>,
}

impl ConversationThread {
    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    /// Always false for a validated thread; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn cue(&self) -> &Tweet {
        &self.tweets[0]
    }

    pub fn root(&self) -> &Tweet {
        &self.tweets[self.tweets.len() - 1]
    }

    pub fn get(&self, index: usize) -> Option<&Tweet> {
        self.tweets.get(index)
    }

    pub fn into_tweets(self) -> Vec<Tweet> {
        self.tweets
    }
}

/// Validates a cue-first list of tweets as a single reply chain.
///
/// Succeeds iff every tweet replies to the next one and only the last tweet
/// is a root. The input order is never changed.
pub fn validate_thread(tweets: Vec<Tweet>) -> Result<ConversationThread, ThreadError> {
    if tweets.is_empty() {
        return Err(ThreadError::Empty);
    }

    for t in &tweets {
        if t.parent_id.as_deref() == Some(t.id.as_str()) {
            return Err(ThreadError::CycleDetected { id: t.id.clone() });
        }
    }

    let mut seen = HashSet::with_capacity(tweets.len());
    for t in &tweets {
        if !seen.insert(t.id.as_str()) {
            return Err(ThreadError::DuplicateId { id: t.id.clone() });
        }
    }

    for (index, pair) in tweets.windows(2).enumerate() {
        let (child, parent) = (&pair[0], &pair[1]);
        match child.parent_id.as_deref() {
            Some(p) if p == parent.id => {}
            Some(p) => {
                return Err(ThreadError::BrokenChain {
                    index,
                    detail: format!("{} replies to {}, expected {}", child.id, p, parent.id),
                })
            }
            None => {
                return Err(ThreadError::BrokenChain {
                    index,
                    detail: format!("{} is a root but is followed by {}", child.id, parent.id),
                })
            }
        }
    }

    let last = &tweets[tweets.len() - 1];
    if let Some(p) = last.parent_id.as_deref() {
        // The last tweet points back into the chain: every id is distinct and
        // the links above hold, so this closes a loop.
        if seen.contains(p) {
            return Err(ThreadError::CycleDetected { id: p.to_string() });
        }
        return Err(ThreadError::BrokenChain {
            index: tweets.len() - 1,
            detail: format!("{} replies to missing parent {}", last.id, p),
        });
    }

    Ok(ConversationThread { tweets })
}

/// Grammatical person of the pronoun a cue uses for the sarcastic author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PersonClass {
    First,
    Second,
    Third,
    Unknown,
}

impl PersonClass {
    pub const KNOWN: [PersonClass; 3] = [PersonClass::First, PersonClass::Second, PersonClass::Third];

    /// 1, 2 or 3; `None` for `Unknown`.
    pub fn number(self) -> Option<u8> {
        match self {
            PersonClass::First => Some(1),
            PersonClass::Second => Some(2),
            PersonClass::Third => Some(3),
            PersonClass::Unknown => None,
        }
    }

    pub fn from_number(n: u8) -> Option<PersonClass> {
        match n {
            1 => Some(PersonClass::First),
            2 => Some(PersonClass::Second),
            3 => Some(PersonClass::Third),
            _ => None,
        }
    }

    pub fn perspective(self) -> Option<Perspective> {
        match self {
            PersonClass::First => Some(Perspective::Intended),
            PersonClass::Second | PersonClass::Third => Some(Perspective::Perceived),
            PersonClass::Unknown => None,
        }
    }
}

impl fmt::Display for PersonClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.number() {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("unknown"),
        }
    }
}

/// Whose sarcasm label it is: the author's own (intended) or a reader's
/// (perceived).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    Intended,
    Perceived,
}

impl Perspective {
    pub fn as_str(self) -> &'static str {
        match self {
            Perspective::Intended => "intended",
            Perspective::Perceived => "perceived",
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
