//! Reactive supervision: harvest labeled sarcasm data from conversation
//! threads.
//!
//! A *cue* is a reply such as "she was just being sarcastic". The harvester
//! finds cues, classifies the grammatical person of the pronoun they use,
//! walks the reply chain back to the root, rewrites the chain's authors as a
//! canonical letter string (`ABAC`, cue author first) and matches that string
//! against a per-person pattern to pinpoint the sarcastic utterance, plus the
//! oblivious and eliciting utterances around it when they can be identified
//! unambiguously.
//!
//! Module map:
//!
//! * [`thread`] — tweets, threads, person classes, chain validation.
//! * [`cue`] — rule-based cue detection and person classification.
//! * [`sequence`] — canonical author sequences and position arithmetic.
//! * [`matcher`] — per-person patterns and role extraction.
//! * [`source`] — JSON Lines corpus and rate-limited HTTP sources.
//! * [`pipeline`] — the end-to-end harvest, negatives, and hashtag baseline.
//! * [`stats`] — corpus breakdowns and report rendering.
//! * [`synth`] — seeded synthetic threads and an independent role oracle.

pub mod cue;
pub mod matcher;
pub mod pipeline;
pub mod sequence;
pub mod source;
pub mod stats;
pub mod synth;
pub mod thread;

pub use cue::{classify_cue, is_cue_candidate, CueDecision, CueReason};
pub use matcher::{match_roles, pattern_for, GroupRole, MatchError, RoleAssignment, RolePattern};
pub use pipeline::{
    harvest, harvest_all, hashtag_harvest, sample_negatives, traverse, DatasetRecord, HarvestConfig, HarvestError,
    HarvestReport, Label, LabeledInstance, NegativeLexicon, Traversal,
};
pub use sequence::{canonicalize, positions_of, AuthorSequence, SequenceError};
pub use source::{ConversationSource, FileCorpus, HttpSource, Page, SourceConfig, SourceError};
pub use thread::{validate_thread, ConversationThread, PersonClass, Perspective, ThreadError, Tweet};
