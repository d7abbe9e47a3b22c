//! Runs the `reactive` binary end to end.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn reactive(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reactive")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn match_prints_roles_or_nomatch() {
    let dir = tempfile::tempdir().unwrap();
    let o = reactive(&["match", "--sequence", "ABAC", "--person", "1"], dir.path());
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "sarc=2 obl=1 eli=3\n"));
    let o = reactive(&["match", "--sequence", "ABAA", "--person", "1"], dir.path());
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "NOMATCH\n"));
    let o = reactive(&["match", "--sequence", "AB", "--person", "2"], dir.path());
    assert_eq!(stdout(&o), "sarc=1 obl=- eli=-\n");
}

#[test]
fn classify_prints_person_and_reason() {
    let dir = tempfile::tempdir().unwrap();
    let o = reactive(&["classify", "--text", "Why are you being sarcastic?"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("person=2 "), "{}", stdout(&o));
    let o = reactive(&["classify", "--text", "I wasn't being sarcastic"], dir.path());
    assert_eq!(stdout(&o), "person=unknown reason=negation_present token=wasn't\n");
}

#[test]
fn usage_errors_exit_2_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["match", "--sequence", "ABAC", "--person", "4"][..],
        &["match", "--sequence", "BA", "--person", "1"],
        &["synth", "--seed", "1", "--ambiguous", "1.5", "--out", "c.jsonl", "--truth", "t.jsonl"],
        &["harvest", "--source", "c.jsonl", "--out", "d.jsonl", "--workers", "0"],
        &["hashtags", "--source", "c.jsonl", "--tags", "sarcasm", "--out", "h.jsonl"],
        &["stats", "--in", "d.jsonl", "--format", "xml"],
        &["frobnicate"],
    ] {
        let o = reactive(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn operational_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = reactive(&["harvest", "--source", "missing.toml", "--out", "d.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("d.jsonl").exists());
    fs::write(dir.path().join("bad.jsonl"), "{not json\n").unwrap();
    let o = reactive(&["stats", "--in", "bad.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn synth_harvest_stats_reproduce_the_plant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mix = r#"[
        {"template": "ABAC", "person": 1, "count": 40},
        {"template": "AB", "person": 2, "count": 30},
        {"template": "ABA", "person": 2, "count": 10},
        {"template": "ABCB", "person": 3, "count": 20}
    ]"#;
    fs::write(d.join("mix.json"), mix).unwrap();
    let o = reactive(
        &[
            "synth",
            "--mix",
            "mix.json",
            "--seed",
            "42",
            "--ambiguous",
            "0.25",
            "--out",
            "c.jsonl",
            "--truth",
            "t.jsonl",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = reactive(&["harvest", "--source", "c.jsonl", "--out", "d.jsonl", "--report", "r.txt"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(d.join("r.txt")).unwrap(), stdout(&o));
    assert!(stdout(&o).contains("fetched: 100\nemitted: 75\n"), "{}", stdout(&o));

    // Recompute each truth's tweet ids from the corpus file on its own:
    // walk parent links from the root to order each thread cue-last.
    let tweets = jsonl(&d.join("c.jsonl"));
    let mut children: BTreeMap<String, String> = BTreeMap::new();
    for t in &tweets {
        if let Some(p) = t["parent_id"].as_str() {
            children.insert(p.to_string(), t["id"].as_str().unwrap().to_string());
        }
    }
    let mut want = Vec::new();
    for truth in jsonl(&d.join("t.jsonl")) {
        let e = &truth["expected"];
        if e.get("sarc_index").is_none() {
            continue;
        }
        let mut chain = vec![truth["thread_root_id"].as_str().unwrap().to_string()];
        while let Some(c) = children.get(chain.last().unwrap()) {
            chain.push(c.clone());
        }
        chain.reverse(); // cue first
        let id = |v: &Value| v.as_u64().map(|i| chain[i as usize].clone());
        want.push((
            e["person"].as_u64().unwrap(),
            id(&e["sarc_index"]).unwrap(),
            id(&e["obl_index"]),
            id(&e["eli_index"]),
        ));
    }
    let mut got: Vec<_> = jsonl(&d.join("d.jsonl"))
        .iter()
        .map(|r| {
            let s = |k: &str| r[k].as_str().map(String::from);
            (r["person"].as_u64().unwrap(), s("sar_id").unwrap(), s("obl_id"), s("eli_id"))
        })
        .collect();
    want.sort();
    got.sort();
    assert_eq!(want.len(), 75);
    assert_eq!(got, want);

    // Planted counts per pattern survive into the histogram.
    let o = reactive(&["stats", "--in", "d.jsonl", "--format", "json", "--top-k", "10"], d);
    let stats: Value = serde_json::from_slice(&o.stdout).unwrap();
    let mut histogram = BTreeMap::new();
    for class in stats["pattern_histogram"]["classes"].as_array().unwrap() {
        for row in class["rows"].as_array().unwrap() {
            let key = (class["person"].to_string(), row["pattern"].as_str().unwrap().to_string());
            histogram.insert(key, row["counts"]["sarcastic"].as_u64().unwrap());
        }
    }
    assert_eq!(histogram.values().sum::<u64>(), 75);
    assert!(histogram.keys().all(|(_, p)| ["ABAC", "AB", "ABA", "ABCB"].contains(&p.as_str())));
}

#[test]
fn harvest_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    reactive(&["synth", "--seed", "9", "--ambiguous", "0.2", "--out", "c.jsonl", "--truth", "t.jsonl"], d);
    for (out, workers) in [("a.jsonl", "1"), ("b.jsonl", "1"), ("w.jsonl", "6")] {
        let o = reactive(&["harvest", "--source", "c.jsonl", "--out", out, "--workers", workers], d);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(d.join("a.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(d.join("b.jsonl")).unwrap());
    assert_eq!(a, fs::read(d.join("w.jsonl")).unwrap());
}

const SMALL_CORPUS: &str = r#"{"id":"1","parent_id":null,"author_id":"u1","text":"great, another monday #sarcasm","created_at":"2019-10-01T08:00:00Z","lang":"en"}
{"id":"2","parent_id":null,"author_id":"u2","text":"lunch was nice","created_at":"2019-10-02T08:00:00Z","lang":"en"}
{"id":"3","parent_id":"2","author_id":"u3","text":"you are being sarcastic","created_at":"2019-10-02T09:00:00Z","lang":"en"}
{"id":"4","parent_id":null,"author_id":"u4","text":"so much irony here","created_at":"2019-10-03T08:00:00Z","lang":"en"}
{"id":"5","parent_id":null,"author_id":"u5","text":"das Wetter ist schön","created_at":"2019-10-03T09:00:00Z","lang":"de"}
{"id":"6","parent_id":null,"author_id":"u6","text":"what a time to be alive #irony","created_at":"2019-10-04T08:00:00Z","lang":"en"}
"#;

#[test]
fn toml_source_config_and_negatives() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("corpus.jsonl"), SMALL_CORPUS).unwrap();
    fs::write(d.join("source.toml"), "kind = \"file\"\npath = \"corpus.jsonl\"\npage_size = 2\n").unwrap();

    let o = reactive(&["harvest", "--source", "source.toml", "--lang", "en", "--out", "d.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let records = jsonl(&d.join("d.jsonl"));
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["sar_id"], "2");

    let o = reactive(&["negatives", "--source", "source.toml", "--count", "1", "--lang", "en", "--out", "n.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let negatives = jsonl(&d.join("n.jsonl"));
    assert_eq!(negatives.len(), 1);
    assert_eq!(negatives[0]["label"], "non_sarcastic");
    assert_eq!(negatives[0]["sar_id"], "2");

    let o = reactive(&["negatives", "--source", "source.toml", "--count", "5", "--lang", "en", "--out", "n2.jsonl"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn hashtag_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("corpus.jsonl"), SMALL_CORPUS).unwrap();
    let o = reactive(&["hashtags", "--source", "corpus.jsonl", "--tags", "#sarcasm,#irony", "--out", "h.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ids: Vec<_> = jsonl(&d.join("h.jsonl")).iter().map(|t| t["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["1", "6"]);
    assert!(stdout(&o).contains("kept: 2\n"), "{}", stdout(&o));
}
