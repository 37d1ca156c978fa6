use std::collections::{BTreeSet, HashMap, VecDeque};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastSet, Origin};
use crate::edit::{CandidateEdit, SeedExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotas {
    pub pos: usize,
    pub neg: usize,
}

impl Default for Quotas {
    fn default() -> Self {
        Quotas { pos: 2, neg: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Positive,
    Negative,
    Rejected,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Positive => "positive",
            Decision::Negative => "negative",
            Decision::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub candidate_id: String,
    pub seed_id: String,
    pub decision: Decision,
    pub at: DateTime<Utc>,
    /// Time between the candidate being served and labeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

/// One line of a session's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SessionEvent {
    Created {
        session_id: String,
        feature_id: String,
        quotas: Quotas,
        seeds: Vec<SeedExample>,
        candidates: Vec<CandidateEdit>,
        at: DateTime<Utc>,
    },
    Label(LabelEvent),
    Undo {
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone)]
struct SeedState {
    seed: SeedExample,
    queue: VecDeque<CandidateEdit>,
    accepted_pos: usize,
    accepted_neg: usize,
}

impl SeedState {
    fn quotas_met(&self, q: Quotas) -> bool {
        self.accepted_pos >= q.pos && self.accepted_neg >= q.neg
    }

    fn finished(&self, q: Quotas) -> bool {
        self.quotas_met(q) || self.queue.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProgress {
    pub seed_id: String,
    pub seed_text: String,
    pub accepted_pos: usize,
    pub accepted_neg: usize,
    pub quota_pos: usize,
    pub quota_neg: usize,
    pub remaining: usize,
    pub finished: bool,
    /// Queue ran out before the quotas were met.
    pub incomplete: bool,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Next {
    Candidate { seed: SeedExample, candidate: CandidateEdit },
    SeedDone { seed_id: String },
    SessionDone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finalized {
    pub contrast_set: ContrastSet,
    /// Seeds whose queue ran out before the quotas were met.
    pub incomplete: Vec<String>,
}

/// Filtering state for one feature's seeds. Every mutation is recorded as a
/// [`SessionEvent`]; replaying the log rebuilds the same state.
#[derive(Debug, Clone)]
pub struct Session {
    session_id: String,
    feature_id: String,
    quotas: Quotas,
    seeds: Vec<SeedState>,
    seed_index: HashMap<String, usize>,
    candidates: HashMap<String, CandidateEdit>,
    history: Vec<LabelEvent>,
    log: Vec<SessionEvent>,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
    served_at: HashMap<String, DateTime<Utc>>,
}

impl Session {
    /// Starts a session. Candidate order within each seed is kept as given.
    pub fn start(
        session_id: impl Into<String>,
        feature_id: impl Into<String>,
        seeds: Vec<SeedExample>,
        candidates: Vec<CandidateEdit>,
        quotas: Quotas,
        at: DateTime<Utc>,
    ) -> Result<Self> {
        let event = SessionEvent::Created {
            session_id: session_id.into(),
            feature_id: feature_id.into(),
            quotas,
            seeds,
            candidates,
            at,
        };
        Session::replay(vec![event])
    }

    pub fn replay(events: Vec<SessionEvent>) -> Result<Self> {
        let mut it = events.into_iter();
        let Some(created @ SessionEvent::Created { .. }) = it.next() else {
            return Err(Error::InvalidInput("session log must start with a `created` event".into()));
        };
        let mut session = Session::from_created(&created)?;
        session.log.push(created);
        for ev in it {
            match &ev {
                SessionEvent::Created { .. } => {
                    return Err(Error::InvalidInput("duplicate `created` event in session log".into()))
                }
                SessionEvent::Label(l) => session.apply_label(l.clone())?,
                SessionEvent::Undo { at } => {
                    session.apply_undo(*at)?;
                }
            }
            session.log.push(ev);
        }
        Ok(session)
    }

    fn from_created(ev: &SessionEvent) -> Result<Self> {
        let SessionEvent::Created {
            session_id,
            feature_id,
            quotas,
            seeds,
            candidates,
            at,
        } = ev
        else {
            unreachable!()
        };
        let mut seed_index = HashMap::new();
        let mut states = Vec::with_capacity(seeds.len());
        for s in seeds {
            if s.feature_id != *feature_id {
                return Err(Error::FeatureMismatch(feature_id.clone(), s.feature_id.clone()));
            }
            if seed_index.insert(s.seed_id.clone(), states.len()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate seed id `{}`", s.seed_id)));
            }
            states.push(SeedState {
                seed: s.clone(),
                queue: VecDeque::new(),
                accepted_pos: 0,
                accepted_neg: 0,
            });
        }
        let mut by_id = HashMap::new();
        for c in candidates {
            let &i = seed_index.get(&c.seed_id).ok_or_else(|| Error::UnknownSeed(c.seed_id.clone()))?;
            if by_id.insert(c.candidate_id.clone(), c.clone()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate candidate id `{}`", c.candidate_id)));
            }
            states[i].queue.push_back(c.clone());
        }
        for s in &states {
            if s.queue.is_empty() {
                log::warn!("seed `{}` has no candidates; it starts exhausted", s.seed.seed_id);
            }
        }
        Ok(Session {
            session_id: session_id.clone(),
            feature_id: feature_id.clone(),
            quotas: *quotas,
            seeds: states,
            seed_index,
            candidates: by_id,
            history: Vec::new(),
            log: Vec::new(),
            created_at: *at,
            updated_at: *at,
            served_at: HashMap::new(),
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn feature_id(&self) -> &str {
        &self.feature_id
    }

    pub fn quotas(&self) -> Quotas {
        self.quotas
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn updated_at(&self) -> DateTime<Utc> {
        self.updated_at
    }

    /// Live decisions, oldest first.
    pub fn history(&self) -> &[LabelEvent] {
        &self.history
    }

    /// The full append-only log, including undone decisions.
    pub fn events(&self) -> &[SessionEvent] {
        &self.log
    }

    pub fn is_done(&self) -> bool {
        self.seeds.iter().all(|s| s.finished(self.quotas))
    }

    pub fn unfinished(&self) -> Vec<String> {
        self.seeds
            .iter()
            .filter(|s| !s.finished(self.quotas))
            .map(|s| s.seed.seed_id.clone())
            .collect()
    }

    pub fn progress(&self) -> Vec<SeedProgress> {
        self.seeds
            .iter()
            .map(|s| SeedProgress {
                seed_id: s.seed.seed_id.clone(),
                seed_text: s.seed.text.clone(),
                accepted_pos: s.accepted_pos,
                accepted_neg: s.accepted_neg,
                quota_pos: self.quotas.pos,
                quota_neg: self.quotas.neg,
                remaining: s.queue.len(),
                finished: s.finished(self.quotas),
                incomplete: s.queue.is_empty() && !s.quotas_met(self.quotas),
                elapsed_ms: self
                    .history
                    .iter()
                    .filter(|e| e.seed_id == s.seed.seed_id)
                    .filter_map(|e| e.elapsed_ms)
                    .sum(),
            })
            .collect()
    }

    /// Head of the requested seed's queue, or of the first unfinished seed.
    pub fn next(&mut self, seed_id: Option<&str>, at: DateTime<Utc>) -> Result<Next> {
        let state = match seed_id {
            Some(id) => {
                let &i = self.seed_index.get(id).ok_or_else(|| Error::UnknownSeed(id.to_string()))?;
                let s = &self.seeds[i];
                if s.finished(self.quotas) {
                    return Ok(Next::SeedDone { seed_id: id.to_string() });
                }
                s
            }
            None => match self.seeds.iter().find(|s| !s.finished(self.quotas)) {
                Some(s) => s,
                None => return Ok(Next::SessionDone),
            },
        };
        let candidate = state.queue.front().expect("unfinished seed has a queue").clone();
        let seed = state.seed.clone();
        self.served_at.entry(candidate.candidate_id.clone()).or_insert(at);
        Ok(Next::Candidate { seed, candidate })
    }

    /// Records a decision for the candidate at the head of its seed's queue.
    pub fn label(&mut self, candidate_id: &str, decision: Decision, at: DateTime<Utc>) -> Result<LabelEvent> {
        let seed_id = self
            .candidates
            .get(candidate_id)
            .map(|c| c.seed_id.clone())
            .ok_or_else(|| Error::NotServed {
                got: candidate_id.to_string(),
                expected: self.served_head().unwrap_or_else(|| "none".into()),
            })?;
        let elapsed_ms = self
            .served_at
            .get(candidate_id)
            .map(|s| (at - *s).num_milliseconds().max(0) as u64);
        let event = LabelEvent {
            candidate_id: candidate_id.to_string(),
            seed_id,
            decision,
            at,
            elapsed_ms,
        };
        self.apply_label(event.clone())?;
        self.served_at.remove(candidate_id);
        self.log.push(SessionEvent::Label(event.clone()));
        Ok(event)
    }

    /// Reverses the most recent live decision; its candidate returns to the
    /// head of its seed's queue.
    pub fn undo(&mut self, at: DateTime<Utc>) -> Result<LabelEvent> {
        let undone = self.apply_undo(at)?;
        self.log.push(SessionEvent::Undo { at });
        Ok(undone)
    }

    fn served_head(&self) -> Option<String> {
        self.seeds
            .iter()
            .find(|s| !s.finished(self.quotas))
            .and_then(|s| s.queue.front())
            .map(|c| c.candidate_id.clone())
    }

    fn apply_label(&mut self, ev: LabelEvent) -> Result<()> {
        let &i = self
            .seed_index
            .get(&ev.seed_id)
            .ok_or_else(|| Error::UnknownSeed(ev.seed_id.clone()))?;
        let q = self.quotas;
        let state = &mut self.seeds[i];
        let quota_met = || Error::QuotaMet {
            seed_id: ev.seed_id.clone(),
            decision: ev.decision.as_str().to_string(),
        };
        if state.finished(q) {
            return Err(quota_met());
        }
        let head = &state.queue.front().expect("unfinished seed has a queue").candidate_id;
        if *head != ev.candidate_id {
            return Err(Error::NotServed {
                got: ev.candidate_id.clone(),
                expected: head.clone(),
            });
        }
        match ev.decision {
            Decision::Positive if state.accepted_pos >= q.pos => return Err(quota_met()),
            Decision::Negative if state.accepted_neg >= q.neg => return Err(quota_met()),
            Decision::Positive => state.accepted_pos += 1,
            Decision::Negative => state.accepted_neg += 1,
            Decision::Rejected => {}
        }
        state.queue.pop_front();
        self.updated_at = ev.at;
        self.history.push(ev);
        Ok(())
    }

    fn apply_undo(&mut self, at: DateTime<Utc>) -> Result<LabelEvent> {
        let ev = self.history.pop().ok_or(Error::NothingToUndo)?;
        let state = &mut self.seeds[self.seed_index[&ev.seed_id]];
        match ev.decision {
            Decision::Positive => state.accepted_pos -= 1,
            Decision::Negative => state.accepted_neg -= 1,
            Decision::Rejected => {}
        }
        state.queue.push_front(self.candidates[&ev.candidate_id].clone());
        self.updated_at = at;
        Ok(ev)
    }

    /// Per seed in order: the seed, its accepted positives, then its accepted negatives.
    pub fn finalize(&self) -> Result<Finalized> {
        let unfinished = self.unfinished();
        if !unfinished.is_empty() {
            return Err(Error::UnfinishedSeeds(unfinished));
        }
        let mut set = ContrastSet::new(self.feature_id.clone());
        let mut incomplete = Vec::new();
        for s in &self.seeds {
            set.insert(s.seed.text.clone(), 1, Origin::Seed)?;
            for (want, label) in [(Decision::Positive, 1), (Decision::Negative, 0)] {
                for ev in self.history.iter().filter(|e| e.seed_id == s.seed.seed_id && e.decision == want) {
                    set.insert(self.candidates[&ev.candidate_id].perturbed_text.clone(), label, Origin::Cgedit)?;
                }
            }
            if !s.quotas_met(self.quotas) {
                incomplete.push(s.seed.seed_id.clone());
            }
        }
        Ok(Finalized {
            contrast_set: set,
            incomplete,
        })
    }

    /// Candidate ids carrying a live decision.
    pub fn decided(&self) -> BTreeSet<&str> {
        self.history.iter().map(|e| e.candidate_id.as_str()).collect()
    }
}
