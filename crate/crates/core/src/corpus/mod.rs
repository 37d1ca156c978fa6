//! Target corpus ingestion, feature inventories and the n-gram index.

mod index;
mod inventory;
mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

pub use index::{NGram, NGramIndex, DEFAULT_ORDERS};
pub use inventory::{
    load_feature_inventory, parse_inventory, resolve_inventory, FeatureSpec, AAE_INVENTORY, INDE_INVENTORY,
};
pub use tokenize::{tokenize, TokenizerProfile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub text: String,
    pub subtokens: Vec<String>,
    pub speaker_id: Option<String>,
}

/// On-disk form of an utterance record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorValue {
    Ordinal(i64),
    Categorical(String),
}

impl std::fmt::Display for FactorValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FactorValue::Ordinal(v) => write!(f, "{v}"),
            FactorValue::Categorical(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Ordinal,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    pub factors: BTreeMap<String, FactorValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub speakers: BTreeMap<String, SpeakerRecord>,
    /// Declared kind of every factor column in the speaker file.
    pub factor_schema: BTreeMap<String, FactorKind>,
    pub tokenizer_profile: TokenizerProfile,
}

impl Corpus {
    /// Builds a corpus from in-memory `(id, text, speaker)` triples.
    pub fn from_texts<I, S>(items: I, profile: TokenizerProfile) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, Option<S>)>,
        S: Into<String>,
    {
        let records = items
            .into_iter()
            .map(|(id, text, speaker)| UtteranceRecord {
                id: id.into(),
                text: text.into(),
                speaker: speaker.map(Into::into),
            })
            .collect();
        Self::from_records(records, BTreeMap::new(), BTreeMap::new(), profile)
    }

    pub fn from_records(
        records: Vec<UtteranceRecord>,
        speakers: BTreeMap<String, SpeakerRecord>,
        factor_schema: BTreeMap<String, FactorKind>,
        profile: TokenizerProfile,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut utterances = Vec::with_capacity(records.len());
        for r in records {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateUtterance(r.id));
            }
            utterances.push(Utterance {
                subtokens: tokenize(&r.text, profile),
                id: r.id,
                text: r.text,
                speaker_id: r.speaker,
            });
        }
        Ok(Corpus {
            utterances,
            speakers,
            factor_schema,
            tokenizer_profile: profile,
        })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Speaker ids referenced by utterances but missing from the speaker table.
    pub fn unresolved_speakers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .utterances
            .iter()
            .filter_map(|u| u.speaker_id.as_deref())
            .filter(|s| !self.speakers.contains_key(*s))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Reads an utterance file and an optional tab-separated speaker file.
pub fn ingest_corpus(utterance_file: &Path, speaker_file: Option<&Path>, profile: TokenizerProfile) -> Result<Corpus> {
    let records: Vec<UtteranceRecord> = jsonl::read(utterance_file)?;
    let (speakers, schema) = match speaker_file {
        Some(p) => read_speakers(p)?,
        None => (BTreeMap::new(), BTreeMap::new()),
    };
    let has_speaker_file = speaker_file.is_some();
    let corpus = Corpus::from_records(records, speakers, schema, profile)?;
    if has_speaker_file {
        for s in corpus.unresolved_speakers() {
            log::warn!("speaker `{s}` is referenced by utterances but missing from the speaker file");
        }
    }
    Ok(corpus)
}

/// Parses the speaker table. A factor column is ordinal when every non-empty
/// value in it is an integer, categorical otherwise.
pub fn read_speakers(path: &Path) -> Result<(BTreeMap<String, SpeakerRecord>, BTreeMap<String, FactorKind>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok((BTreeMap::new(), BTreeMap::new()));
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    if columns.first() != Some(&"speaker_id") {
        return Err(Error::parse(path, 1, "first header column must be `speaker_id`"));
    }
    let factors = &columns[1..];

    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {} columns, found {}", columns.len(), cells.len()),
            ));
        }
        rows.push((i + 1, cells));
    }

    let schema: BTreeMap<String, FactorKind> = factors
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let ordinal = rows
                .iter()
                .map(|(_, c)| c[j + 1])
                .filter(|v| !v.is_empty())
                .all(|v| v.parse::<i64>().is_ok());
            let kind = if ordinal { FactorKind::Ordinal } else { FactorKind::Categorical };
            (name.to_string(), kind)
        })
        .collect();

    let mut speakers = BTreeMap::new();
    for (line, cells) in rows {
        let id = cells[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty speaker_id"));
        }
        let mut record = SpeakerRecord {
            speaker_id: id.clone(),
            factors: BTreeMap::new(),
        };
        for (j, name) in factors.iter().enumerate() {
            let v = cells[j + 1];
            if v.is_empty() {
                continue;
            }
            let value = match schema[*name] {
                FactorKind::Ordinal => FactorValue::Ordinal(v.parse().expect("checked above")),
                FactorKind::Categorical => FactorValue::Categorical(v.to_string()),
            };
            record.factors.insert(name.to_string(), value);
        }
        match speakers.get(&id) {
            Some(existing) if existing == &record => {}
            Some(_) => return Err(Error::parse(path, line, format!("conflicting records for speaker `{id}`"))),
            None => {
                speakers.insert(id, record);
            }
        }
    }
    Ok((speakers, schema))
}
