//! Canonical author sequences.
//!
//! Authors are relabeled `A`, `B`, `C`, … in order of first appearance,
//! scanning from the cue (index 0) toward the root. Because the thread is
//! stored cue-first, a letter's index is the cue lag of that tweet.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::thread::ConversationThread;

pub const MAX_AUTHORS: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("thread has {0} distinct authors, at most 26 can be labeled")]
    TooManyAuthors(usize),
    #[error("sarcastic index {index} out of range for a thread of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuthorSequence {
    letters: String,
    /// Raw author id for each letter, in letter order (`authors[0]` is `A`).
    authors: Vec<String>,
}

impl AuthorSequence {
    pub fn letters(&self) -> &str {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn distinct_authors(&self) -> usize {
        self.authors.len()
    }

    pub fn author_of(&self, letter: char) -> Option<&str> {
        let idx = (letter as usize).checked_sub('A' as usize)?;
        self.authors.get(idx).map(String::as_str)
    }

    pub fn letter_of(&self, author_id: &str) -> Option<char> {
        self.authors.iter().position(|a| a == author_id).map(|i| (b'A' + i as u8) as char)
    }
}

/// Relabels the thread's authors cue-first.
pub fn canonicalize(thread: &ConversationThread) -> Result<AuthorSequence, SequenceError> {
    canonicalize_authors(thread.tweets().iter().map(|t| t.author_id.as_str()))
}

/// Relabels an arbitrary cue-first author list.
pub fn canonicalize_authors<'a, I>(authors: I) -> Result<AuthorSequence, SequenceError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut index: HashMap<&str, u8> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut letters = String::new();
    for author in authors {
        let next = index.len();
        let slot = *index.entry(author).or_insert_with(|| {
            order.push(author.to_string());
            next as u8
        });
        if index.len() > MAX_AUTHORS {
            continue;
        }
        letters.push((b'A' + slot) as char);
    }
    if index.len() > MAX_AUTHORS {
        return Err(SequenceError::TooManyAuthors(index.len()));
    }
    Ok(AuthorSequence { letters, authors: order })
}

/// True iff `letters` is non-empty, uppercase, and introduces letters in
/// alphabetical order of first appearance.
pub fn is_canonical(letters: &str) -> bool {
    let mut next = b'A';
    for b in letters.bytes() {
        if !b.is_ascii_uppercase() || b > next {
            return false;
        }
        if b == next {
            next += 1;
        }
    }
    !letters.is_empty()
}

/// Position (distance from the root) and cue lag of the sarcastic tweet at
/// cue-first index `sarcastic_index` in a thread of `len` tweets.
pub fn positions_of(len: usize, sarcastic_index: usize) -> Result<(usize, usize), SequenceError> {
    if sarcastic_index == 0 || sarcastic_index >= len {
        return Err(SequenceError::IndexOutOfRange { index: sarcastic_index, len });
    }
    Ok((len - 1 - sarcastic_index, sarcastic_index))
}
