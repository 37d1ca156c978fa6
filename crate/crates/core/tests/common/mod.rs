#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use cgedit::annotation::{AppState, CandidatePool, Decision, Next, Quotas, Session, SessionStore};
use cgedit::contrast::ContrastSet;
use cgedit::corpus::{Corpus, TokenizerProfile, UtteranceRecord};
use cgedit::edit::{CandidateEdit, SeedExample};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/fixtures").join(name)
}

pub const WORKED_SEED: &str = "He on the five dollar";

pub const WORKED_PERTURBED: [&str; 17] = [
    "He on the last five",
    "He on the five",
    "on the other five dollar",
    "He on the five hundred dollar",
    "He was on the dollar",
    "on the five dollar",
    "the on five dollar",
    "He and five on the dollar",
    "He was on the five dollar",
    "He on the five dollar bill",
    "He beating on the five dollar",
    "He on the dollar",
    "He on the other dollar",
    "He on five dollar",
    "He the five dollar",
    "He on five dollar bill",
    "was on the five dollar",
];

pub const WORKED_POSITIVES: [&str; 2] = ["He on the last five", "He on the five"];
pub const WORKED_NEGATIVES: [&str; 3] = ["on the other five dollar", "He was on the dollar", "on the five dollar"];

/// Decision the scripted annotator makes for a candidate text.
pub fn worked_decision(text: &str) -> Decision {
    if WORKED_POSITIVES.contains(&text) {
        Decision::Positive
    } else if WORKED_NEGATIVES.contains(&text) {
        Decision::Negative
    } else {
        Decision::Rejected
    }
}

/// Drives an in-process session to completion with `decide`.
pub fn annotate_in_process(
    feature_id: &str,
    seeds: Vec<SeedExample>,
    candidates: Vec<CandidateEdit>,
    decide: impl Fn(&SeedExample, &CandidateEdit) -> Decision,
) -> ContrastSet {
    let t = chrono::DateTime::from_timestamp(0, 0).unwrap();
    let mut s = Session::start("scripted", feature_id, seeds, candidates, Quotas::default(), t).unwrap();
    while let Next::Candidate { seed, candidate } = s.next(None, t).unwrap() {
        let p = s.progress().into_iter().find(|p| p.seed_id == seed.seed_id).unwrap();
        let d = match decide(&seed, &candidate) {
            Decision::Positive if p.accepted_pos >= p.quota_pos => Decision::Rejected,
            Decision::Negative if p.accepted_neg >= p.quota_neg => Decision::Rejected,
            d => d,
        };
        s.label(&candidate.candidate_id, d, t).unwrap();
    }
    s.finalize().unwrap().contrast_set
}

pub fn app_state(seeds: Vec<SeedExample>, candidates: Vec<CandidateEdit>, store: SessionStore) -> AppState {
    AppState {
        store: std::sync::Arc::new(store),
        pool: std::sync::Arc::new(CandidatePool { seeds, candidates }),
        features: std::sync::Arc::new(BTreeMap::new()),
        quotas: Quotas::default(),
    }
}

pub fn http_get(url: &str) -> Result<Value, (u16, Value)> {
    into_json(ureq::get(url).call())
}

pub fn http_post(url: &str, body: Value) -> Result<Value, (u16, Value)> {
    into_json(ureq::post(url).send_json(body))
}

fn into_json(r: Result<ureq::Response, ureq::Error>) -> Result<Value, (u16, Value)> {
    match r {
        Ok(resp) => Ok(resp.into_json().unwrap()),
        Err(ureq::Error::Status(code, resp)) => Err((code, resp.into_json().unwrap_or(Value::Null))),
        Err(e) => panic!("transport error: {e}"),
    }
}

/// Scripted annotator over the HTTP API: decides by candidate text and
/// returns the finalize response.
pub fn annotate_over_http(base: &str, feature_id: &str, decide: impl Fn(&str) -> &'static str) -> Value {
    let created = http_post(&format!("{base}/api/sessions"), json!({ "feature_id": feature_id })).unwrap();
    let id = created["session_id"].as_str().unwrap().to_string();
    loop {
        let next = http_get(&format!("{base}/api/sessions/{id}/next")).unwrap();
        match next["status"].as_str().unwrap() {
            "session_done" => break,
            "candidate" => {
                let cid = next["candidate"]["candidate_id"].as_str().unwrap();
                let text = next["candidate"]["perturbed_text"].as_str().unwrap();
                http_post(
                    &format!("{base}/api/sessions/{id}/label"),
                    json!({ "candidate_id": cid, "decision": decide(text) }),
                )
                .unwrap();
            }
            other => panic!("unexpected status {other}"),
        }
    }
    let mut fin = http_post(&format!("{base}/api/sessions/{id}/finalize"), json!({})).unwrap();
    fin["session_id"] = Value::String(id);
    fin
}

const SUBJECTS: [&str; 8] = ["she", "he", "they", "we", "my cousin", "the kids", "you", "I"];
const VERBS: [&str; 10] = ["go", "eat", "leave", "call", "walk", "play", "cook", "sleep", "drive", "read"];
const TAILS: [&str; 10] = [
    "to the store",
    "at home",
    "with my uncle",
    "after school",
    "on the porch",
    "down the street",
    "every day",
    "in the morning",
    "for a while",
    "over there",
];
const AUX: [&str; 5] = ["gonna", "about to", "going to", "want to", "used to"];

/// 1,000 synthetic utterances; exactly `marked` of them carry "finna".
pub fn finna_corpus(marked: usize, seed: u64) -> (Corpus, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let s = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
        let v = VERBS[rng.gen_range(0..VERBS.len())];
        let t = TAILS[rng.gen_range(0..TAILS.len())];
        let text = if rng.gen_bool(0.5) {
            format!("{s} {} {v} {t}", AUX[rng.gen_range(0..AUX.len())])
        } else {
            format!("{s} {v} {t}")
        };
        texts.push(text);
    }
    let mut order: Vec<usize> = (0..1000).collect();
    order.shuffle(&mut rng);
    let mut marked_ids = Vec::new();
    for &i in &order[..marked] {
        let s = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
        let v = VERBS[rng.gen_range(0..VERBS.len())];
        let t = TAILS[rng.gen_range(0..TAILS.len())];
        texts[i] = format!("{s} finna {v} {t}");
        marked_ids.push(format!("u{i:04}"));
    }
    marked_ids.sort();
    let records = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| UtteranceRecord {
            id: format!("u{i:04}"),
            text,
            speaker: Some(format!("s{:02}", i % 25)),
        })
        .collect();
    let corpus = Corpus::from_records(records, BTreeMap::new(), BTreeMap::new(), TokenizerProfile::CASED).unwrap();
    (corpus, marked_ids)
}

pub fn finna_seeds() -> Vec<SeedExample> {
    [
        "she finna go to the store",
        "we finna eat at home",
        "they finna leave after school",
        "he finna call my uncle",
        "I finna walk down the street",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| SeedExample::new(format!("fn{}", i + 1), "finna", *t, TokenizerProfile::CASED))
    .collect()
}
