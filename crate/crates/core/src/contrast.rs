//! Labeled training sets (contrast sets) and their file format.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// Where a training example came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Cgedit,
    Manualgen,
    Autogen,
    Autoid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastEntry {
    pub text: String,
    pub label: u8,
    pub origins: BTreeSet<Origin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastSet {
    pub feature_id: String,
    pub entries: Vec<ContrastEntry>,
}

/// One line of a contrast-set file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastRecord {
    pub feature_id: String,
    pub text: String,
    pub label: u8,
    pub origins: BTreeSet<Origin>,
}

impl ContrastSet {
    pub fn new(feature_id: impl Into<String>) -> Self {
        ContrastSet {
            feature_id: feature_id.into(),
            entries: Vec::new(),
        }
    }

    /// Adds an example. Same text with the same label merges origins; same
    /// text with the other label is an error.
    pub fn insert(&mut self, text: impl Into<String>, label: u8, origin: Origin) -> Result<()> {
        self.insert_entry(ContrastEntry {
            text: text.into(),
            label,
            origins: BTreeSet::from([origin]),
        })
    }

    fn insert_entry(&mut self, entry: ContrastEntry) -> Result<()> {
        if entry.label > 1 {
            return Err(Error::InvalidInput(format!("label {} is not 0 or 1", entry.label)));
        }
        match self.entries.iter_mut().find(|e| e.text == entry.text) {
            Some(e) if e.label != entry.label => Err(Error::LabelConflict(entry.text)),
            Some(e) => {
                e.origins.extend(entry.origins);
                Ok(())
            }
            None => {
                self.entries.push(entry);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|e| e.label == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.entries.iter().filter(|e| e.label == 0).count()
    }

    pub fn records(&self) -> Vec<ContrastRecord> {
        self.entries
            .iter()
            .map(|e| ContrastRecord {
                feature_id: self.feature_id.clone(),
                text: e.text.clone(),
                label: e.label,
                origins: e.origins.clone(),
            })
            .collect()
    }
}

/// Union of two sets for the same feature; `a`'s entries keep their order,
/// `b`'s new entries follow.
pub fn merge_sets(a: &ContrastSet, b: &ContrastSet) -> Result<ContrastSet> {
    if a.feature_id != b.feature_id {
        return Err(Error::FeatureMismatch(a.feature_id.clone(), b.feature_id.clone()));
    }
    let mut out = a.clone();
    for e in &b.entries {
        out.insert_entry(e.clone())?;
    }
    Ok(out)
}

/// Groups records by feature, keeping first-appearance order of features.
pub fn from_records(records: Vec<ContrastRecord>) -> Result<Vec<ContrastSet>> {
    let mut order: Vec<String> = Vec::new();
    let mut sets: BTreeMap<String, ContrastSet> = BTreeMap::new();
    for r in records {
        let set = sets.entry(r.feature_id.clone()).or_insert_with(|| {
            order.push(r.feature_id.clone());
            ContrastSet::new(r.feature_id.clone())
        });
        set.insert_entry(ContrastEntry {
            text: r.text,
            label: r.label,
            origins: r.origins,
        })?;
    }
    Ok(order.into_iter().map(|f| sets.remove(&f).unwrap()).collect())
}

pub fn load_contrast_sets(path: &Path) -> Result<Vec<ContrastSet>> {
    from_records(jsonl::read(path)?)
}

pub fn to_jsonl(sets: &[ContrastSet]) -> String {
    let records: Vec<ContrastRecord> = sets.iter().flat_map(ContrastSet::records).collect();
    jsonl::to_string(&records)
}

pub fn save_contrast_sets(path: &Path, sets: &[ContrastSet]) -> Result<()> {
    let records: Vec<ContrastRecord> = sets.iter().flat_map(ContrastSet::records).collect();
    jsonl::write(path, &records)
}
