use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::featurize::featurize;
use super::model::MultiHeadModel;
use crate::contrast::{self, ContrastRecord, ContrastSet};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Native,
    Imported,
}

/// Utterances x features probability grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub utterance_ids: Vec<String>,
    pub feature_ids: Vec<String>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub utterance_id: String,
    pub feature_id: String,
    pub score: f64,
}

impl ScoreMatrix {
    pub fn feature_index(&self, feature_id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == feature_id)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.feature_ids.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.feature_ids.len();
        &self.values[row * w..(row + 1) * w]
    }

    /// `(utterance_id, score)` pairs for one feature, in row order.
    pub fn column(&self, feature_id: &str) -> Result<Vec<(&str, f64)>> {
        let col = self
            .feature_index(feature_id)
            .ok_or_else(|| Error::UnknownFeature(feature_id.to_string()))?;
        Ok(self
            .utterance_ids
            .iter()
            .enumerate()
            .map(|(r, id)| (id.as_str(), self.get(r, col)))
            .collect())
    }

    pub fn records(&self) -> Vec<ScoreRecord> {
        let mut out = Vec::with_capacity(self.values.len());
        for (r, u) in self.utterance_ids.iter().enumerate() {
            for (c, f) in self.feature_ids.iter().enumerate() {
                out.push(ScoreRecord {
                    utterance_id: u.clone(),
                    feature_id: f.clone(),
                    score: self.get(r, c),
                });
            }
        }
        out
    }

    /// Builds a full matrix from records over the given ids. Every cell must be
    /// present exactly once and lie in [0, 1].
    pub fn from_records(
        records: &[ScoreRecord],
        utterance_ids: Vec<String>,
        feature_ids: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        let rows: HashMap<&str, usize> = utterance_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let cols: HashMap<&str, usize> = feature_ids.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
        let width = feature_ids.len();
        let mut values: Vec<Option<f64>> = vec![None; utterance_ids.len() * width];
        for rec in records {
            let r = *rows
                .get(rec.utterance_id.as_str())
                .ok_or_else(|| Error::UnknownUtterance(rec.utterance_id.clone()))?;
            let c = *cols
                .get(rec.feature_id.as_str())
                .ok_or_else(|| Error::UnknownFeature(rec.feature_id.clone()))?;
            if !(0.0..=1.0).contains(&rec.score) {
                return Err(Error::ScoreRange {
                    utterance_id: rec.utterance_id.clone(),
                    feature_id: rec.feature_id.clone(),
                    score: rec.score,
                });
            }
            if values[r * width + c].replace(rec.score).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate score for ({}, {})",
                    rec.utterance_id, rec.feature_id
                )));
            }
        }
        let mut gaps = Vec::new();
        for (r, u) in utterance_ids.iter().enumerate() {
            for (c, f) in feature_ids.iter().enumerate() {
                if values[r * width + c].is_none() {
                    gaps.push((u.clone(), f.clone()));
                }
            }
        }
        if !gaps.is_empty() {
            return Err(Error::MissingScores(gaps));
        }
        Ok(ScoreMatrix {
            utterance_ids,
            feature_ids,
            values: values.into_iter().map(Option::unwrap).collect(),
            provenance,
        })
    }

    /// Rebuilds a matrix from a score file alone, taking ids in first-seen order.
    pub fn from_score_file(path: &Path, provenance: Provenance) -> Result<Self> {
        let records = read_score_records(path)?;
        let mut utts = Vec::new();
        let mut feats = Vec::new();
        let mut seen_u = BTreeSet::new();
        let mut seen_f = BTreeSet::new();
        for r in &records {
            if seen_u.insert(r.utterance_id.clone()) {
                utts.push(r.utterance_id.clone());
            }
            if seen_f.insert(r.feature_id.clone()) {
                feats.push(r.feature_id.clone());
            }
        }
        Self::from_records(&records, utts, feats, provenance)
    }
}

/// Scores every utterance with every head.
pub fn score_corpus(model: &MultiHeadModel, corpus: &Corpus) -> ScoreMatrix {
    let heads: Vec<_> = model.heads.values().collect();
    let values: Vec<f64> = corpus
        .utterances
        .par_iter()
        .flat_map_iter(|u| {
            let x = featurize(&u.text, &model.featurizer);
            heads.iter().map(move |h| h.probability(&x)).collect::<Vec<_>>()
        })
        .collect();
    ScoreMatrix {
        utterance_ids: corpus.utterances.iter().map(|u| u.id.clone()).collect(),
        feature_ids: model.heads.keys().cloned().collect(),
        values,
        provenance: Provenance::Native,
    }
}

/// Reads scores produced by an external model. The file must cover exactly
/// the corpus x features grid.
pub fn import_external_scores(path: &Path, corpus: &Corpus, features: &[String]) -> Result<ScoreMatrix> {
    let records = read_score_records(path)?;
    ScoreMatrix::from_records(
        &records,
        corpus.utterances.iter().map(|u| u.id.clone()).collect(),
        features.to_vec(),
        Provenance::Imported,
    )
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tsv")
}

/// Score files are TSV (`utterance_id feature_id score` with a header) when
/// the name ends in `.tsv`, JSON lines otherwise.
pub fn read_score_records(path: &Path) -> Result<Vec<ScoreRecord>> {
    if !is_tsv(path) {
        return jsonl::read(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.starts_with("utterance_id")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [u, f, s] = cols[..] else {
            return Err(Error::parse(path, i + 1, "expected 3 tab-separated columns"));
        };
        let score: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad score `{s}`")))?;
        out.push(ScoreRecord {
            utterance_id: u.to_string(),
            feature_id: f.to_string(),
            score,
        });
    }
    Ok(out)
}

pub fn write_score_records(path: &Path, matrix: &ScoreMatrix) -> Result<()> {
    if !is_tsv(path) {
        return jsonl::write(path, &matrix.records());
    }
    let mut body = String::from("utterance_id\tfeature_id\tscore\n");
    for r in matrix.records() {
        writeln!(body, "{}\t{}\t{}", r.utterance_id, r.feature_id, r.score).unwrap();
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Training record handed to external fine-tuning scripts.
pub type TrainingRecord = ContrastRecord;

pub fn export_training_jsonl(path: &Path, sets: &[ContrastSet]) -> Result<usize> {
    let records: Vec<TrainingRecord> = sets.iter().flat_map(ContrastSet::records).collect();
    jsonl::write(path, &records)?;
    Ok(records.len())
}

pub fn load_training_jsonl(path: &Path) -> Result<Vec<ContrastSet>> {
    contrast::load_contrast_sets(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{FeaturizerConfig, TrainingConfig};
    use crate::contrast::Origin;
    use crate::corpus::TokenizerProfile;
    use std::io::Write;

    fn corpus() -> Corpus {
        Corpus::from_texts(
            [("u1", "she finna go", None), ("u2", "she gonna go", None), ("u3", "he on the five dollar", None)],
            TokenizerProfile::CASED,
        )
        .unwrap()
    }

    fn model() -> MultiHeadModel {
        let mut m = MultiHeadModel::zeroed(&["finna", "zero_copula"], FeaturizerConfig::default(), TrainingConfig::default());
        let x = featurize("finna", &m.featurizer);
        m.heads.get_mut("finna").unwrap().weights = x.indices.iter().map(|&d| (d, 0.3)).collect();
        m
    }

    #[test]
    fn full_grid_in_unit_interval() {
        let s = score_corpus(&model(), &corpus());
        assert_eq!(s.values.len(), 6);
        assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(s.provenance, Provenance::Native);
    }

    #[test]
    fn rows_match_single_scores() {
        let m = model();
        let c = corpus();
        let s = score_corpus(&m, &c);
        for (r, u) in c.utterances.iter().enumerate() {
            for (col, f) in s.feature_ids.iter().enumerate() {
                assert_eq!(s.get(r, col), m.score(f, &u.text).unwrap());
            }
        }
    }

    fn write(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn import_full_grid() {
        let f = write("utterance_id\tfeature_id\tscore\nu1\tfinna\t0.9\nu2\tfinna\t0.2\nu3\tfinna\t0\n", ".tsv");
        let s = import_external_scores(f.path(), &corpus(), &["finna".into()]).unwrap();
        assert_eq!(s.provenance, Provenance::Imported);
        assert_eq!(s.column("finna").unwrap()[0], ("u1", 0.9));
    }

    #[test]
    fn import_reports_gaps() {
        let f = write("{\"utterance_id\":\"u1\",\"feature_id\":\"finna\",\"score\":0.9}\n", ".jsonl");
        match import_external_scores(f.path(), &corpus(), &["finna".into()]) {
            Err(Error::MissingScores(g)) => assert_eq!(g, [("u2".into(), "finna".into()), ("u3".into(), "finna".into())]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn import_rejects_out_of_range_and_unknown() {
        let f = write("u1\tfinna\t1.2\n", ".tsv");
        assert!(matches!(
            import_external_scores(f.path(), &corpus(), &["finna".into()]),
            Err(Error::ScoreRange { .. })
        ));
        let f = write("u9\tfinna\t0.2\n", ".tsv");
        assert!(matches!(
            import_external_scores(f.path(), &corpus(), &["finna".into()]),
            Err(Error::UnknownUtterance(_))
        ));
    }

    #[test]
    fn score_file_round_trip() {
        let s = score_corpus(&model(), &corpus());
        let dir = tempfile::tempdir().unwrap();
        for name in ["s.tsv", "s.jsonl"] {
            let p = dir.path().join(name);
            write_score_records(&p, &s).unwrap();
            let back = ScoreMatrix::from_score_file(&p, Provenance::Native).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn training_export_round_trip() {
        let mut set = ContrastSet::new("zero_copula");
        for i in 0..15 {
            set.insert(format!("positive {i} ☕"), 1, Origin::Seed).unwrap();
            set.insert(format!("negative {i}"), 0, Origin::Cgedit).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.jsonl");
        assert_eq!(export_training_jsonl(&p, &[set.clone()]).unwrap(), 30);
        assert_eq!(load_training_jsonl(&p).unwrap(), vec![set]);
    }
}
