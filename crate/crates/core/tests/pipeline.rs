//! End-to-end harvest behavior over in-memory and failing sources.

use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use reactive_core::synth::{default_mix, generate_corpus, generate_thread, Shape, Truth};
use reactive_core::{
    harvest, harvest_all, ConversationSource, FileCorpus, HarvestConfig, HarvestError, Label, Page, PersonClass,
    Perspective, SourceError, Tweet,
};

fn tweet(id: &str, parent: Option<&str>, author: &str, text: &str) -> Tweet {
    Tweet {
        id: id.into(),
        parent_id: parent.map(Into::into),
        author_id: author.into(),
        text: text.into(),
        created_at: Utc.with_ymd_and_hms(2019, 10, 10, 9, 0, 0).unwrap(),
        lang: "en".into(),
    }
}

#[test]
fn third_person_cue_labels_perceived_sarcasm() {
    // Root by C, reply by B, cue by A referring to C in the third person.
    let corpus = FileCorpus::from_tweets([
        tweet("1", None, "carol", "Love waiting two hours for a bus"),
        tweet("2", Some("1"), "bob", "Same! buses are the best"),
        tweet("3", Some("2"), "alice", "She was just being sarcastic!"),
    ]);
    let (out, report) = harvest_all(&corpus, &HarvestConfig::default()).unwrap();
    assert_eq!(report.emitted, 1);
    let i = &out[0];
    assert_eq!(i.label, Label::Sarcastic);
    assert_eq!(i.person, Some(PersonClass::Third));
    assert_eq!(i.perspective, Some(Perspective::Perceived));
    assert_eq!(i.sarcastic_tweet.id, "1");
    assert_eq!(i.oblivious_tweet.as_ref().unwrap().id, "2");
    assert_eq!(i.eliciting_tweet, None);
    assert_eq!(i.cue_tweet.as_ref().unwrap().id, "3");
    assert_eq!(i.author_sequence.as_deref(), Some("ABC"));
    assert_eq!((i.position, i.cue_lag), (Some(0), Some(2)));
}

#[test]
fn first_person_cue_labels_intended_sarcasm() {
    let corpus = FileCorpus::from_tweets([
        tweet("1", None, "carol", "Traffic again"),
        tweet("2", Some("1"), "alice", "Can't wait to do this every day forever"),
        tweet("3", Some("2"), "bob", "wait, really?"),
        tweet("4", Some("3"), "alice", "I was just being sarcastic!"),
    ]);
    let (out, _) = harvest_all(&corpus, &HarvestConfig::default()).unwrap();
    let r = out[0].to_record();
    assert_eq!(r.person, Some(1));
    assert_eq!(r.perspective, Some(Perspective::Intended));
    assert_eq!(r.author_sequence.as_deref(), Some("ABAC"));
    assert_eq!((r.sar_id.as_str(), r.obl_id.as_deref(), r.eli_id.as_deref()), ("2", Some("3"), Some("1")));
    assert_eq!((r.position, r.cue_lag), (Some(1), Some(2)));
}

#[test]
fn record_field_order_is_stable() {
    let corpus = FileCorpus::from_tweets([
        tweet("1", None, "bob", "what a lovely day"),
        tweet("2", Some("1"), "alice", "Why are you being sarcastic?"),
    ]);
    let (out, _) = harvest_all(&corpus, &HarvestConfig::default()).unwrap();
    let mut line = Vec::new();
    out[0].write_jsonl(&mut line).unwrap();
    assert_eq!(
        String::from_utf8(line).unwrap(),
        concat!(
            r#"{"label":"sarcastic","person":2,"perspective":"perceived","sar_id":"1","sar_text":"what a lovely day","#,
            r#""cue_id":"2","cue_text":"Why are you being sarcastic?","obl_id":null,"obl_text":null,"#,
            r#""eli_id":null,"eli_text":null,"author_sequence":"AB","position":0,"cue_lag":1}"#,
            "\n"
        )
    );
}

#[test]
fn missing_parent_is_a_broken_skip() {
    let corpus = FileCorpus::from_tweets([
        tweet("2", Some("1"), "bob", "what a lovely day"),
        tweet("3", Some("2"), "alice", "Why are you being sarcastic?"),
    ]);
    let (out, report) = harvest_all(&corpus, &HarvestConfig::default()).unwrap();
    assert!(out.is_empty());
    assert_eq!(report.broken_skips, 1);
    assert_eq!(report.broken_by_reason.get("missing_parent"), Some(&1));
    assert!(report.is_conserved());
}

#[test]
fn worker_count_does_not_change_output() {
    let planted = generate_corpus(&default_mix()[..4], 0.2, 7).unwrap();
    let corpus = FileCorpus::from_tweets(planted.tweets().cloned());
    let run = |workers| {
        let (out, report) = harvest_all(&corpus, &HarvestConfig { workers, ..HarvestConfig::default() }).unwrap();
        let mut bytes = Vec::new();
        for i in &out {
            i.write_jsonl(&mut bytes).unwrap();
        }
        (bytes, report)
    };
    let (single, r1) = run(1);
    let (multi, r8) = run(8);
    assert_eq!(single, multi);
    assert_eq!(r1, r8);
}

/// Delegates to a corpus but fails every lookup after a budget.
struct Flaky {
    inner: FileCorpus,
    budget: AtomicUsize,
}

impl ConversationSource for Flaky {
    fn search_cues(&self, query: &str, cursor: Option<&str>) -> Result<Page, SourceError> {
        self.inner.search_cues(query, cursor)
    }

    fn lookup_tweet(&self, id: &str) -> Result<Option<Tweet>, SourceError> {
        if self.budget.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |b| b.checked_sub(1)).is_err() {
            return Err(SourceError::RateLimited { attempts: 4 });
        }
        self.inner.lookup_tweet(id)
    }
}

#[test]
fn source_failure_keeps_partial_output() {
    // Second-person AB threads need one lookup each.
    let mut tweets = Vec::new();
    for k in 0..5 {
        tweets.push(tweet(&format!("r{k}"), None, "bob", "nice weather"));
        tweets.push(tweet(&format!("c{k}"), Some(&format!("r{k}")), "alice", "you are being sarcastic"));
    }
    let flaky = Flaky { inner: FileCorpus::from_tweets(tweets).with_page_size(1), budget: AtomicUsize::new(3) };
    let mut emitted = Vec::new();
    let err = harvest(&flaky, &HarvestConfig::default(), |i| {
        emitted.push(i.sarcastic_tweet.id);
        Ok(())
    })
    .unwrap_err();
    let HarvestError::Source { source, partial } = err else { panic!("unexpected error kind") };
    assert!(matches!(source, SourceError::RateLimited { .. }));
    assert_eq!(emitted, ["r0", "r1", "r2"]);
    assert_eq!(partial.emitted, 3);
    assert!(partial.is_conserved());
}

#[test]
fn sink_failure_stops_the_harvest() {
    let corpus = FileCorpus::from_tweets([
        tweet("1", None, "bob", "what a lovely day"),
        tweet("2", Some("1"), "alice", "Why are you being sarcastic?"),
    ]);
    let err = harvest(&corpus, &HarvestConfig::default(), |_| Err(std::io::Error::other("disk full"))).unwrap_err();
    assert!(matches!(err, HarvestError::Sink(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// A generated thread is emitted iff its oracle truth matches, with the
    /// truth's roles.
    #[test]
    fn harvest_recovers_generated_truth(person in 1u8..=3, seed in any::<u64>(), max_len in 3usize..9) {
        let person = PersonClass::from_number(person).unwrap();
        let planted = generate_thread(person, &Shape::Random { max_len }, seed).unwrap();
        let corpus = FileCorpus::from_tweets(planted.thread.tweets().iter().rev().cloned());
        let (out, report) = harvest_all(&corpus, &HarvestConfig::default()).unwrap();
        prop_assert!(report.is_conserved());
        match &planted.truth {
            Truth::Matched(_) => {
                let (s, o, e) = planted.expected_ids().unwrap();
                prop_assert_eq!(out.len(), 1);
                let r = out[0].to_record();
                prop_assert_eq!(r.sar_id, s);
                prop_assert_eq!(r.obl_id, o);
                prop_assert_eq!(r.eli_id, e);
                prop_assert_eq!(r.position.unwrap() + r.cue_lag.unwrap(), planted.thread.len() - 1);
                prop_assert_eq!(r.author_sequence.as_deref(), Some(planted.template.as_str()));
            }
            Truth::ExpectedDiscard(_) => prop_assert!(out.is_empty()),
        }
    }
}
