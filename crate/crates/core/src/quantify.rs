//! Per-speaker feature frequencies by Classify & Count, and group statistics
//! over speaker social factors.
//!
//! These statistics describe feature use within groups of speakers. They are
//! not a basis for inferring any individual speaker's attributes from their
//! feature frequencies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::ScoreMatrix;
use crate::corpus::{Corpus, FactorKind, FactorValue, SpeakerRecord};
use crate::error::{Error, Result};
use crate::eval::sample_std;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerCounts {
    pub utterance_count: usize,
    pub positive_counts: BTreeMap<String, usize>,
}

impl SpeakerCounts {
    pub fn frequency(&self, feature_id: &str) -> Option<f64> {
        let pos = *self.positive_counts.get(feature_id)?;
        Some(pos as f64 / self.utterance_count as f64)
    }

    /// Mean of this speaker's frequencies over `features`.
    pub fn mean_frequency(&self, features: &[String]) -> Result<f64> {
        if features.is_empty() {
            return Err(Error::InvalidInput("empty feature subset".into()));
        }
        let mut sum = 0.0;
        for f in features {
            sum += self.frequency(f).ok_or_else(|| Error::UnknownFeature(f.clone()))?;
        }
        Ok(sum / features.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerFrequencyTable {
    pub threshold: f64,
    pub feature_ids: Vec<String>,
    pub speakers: BTreeMap<String, SpeakerCounts>,
}

/// Counts, per speaker and feature, the utterances scored at or above
/// `threshold`. Utterances without a speaker are ignored.
pub fn classify_count(scores: &ScoreMatrix, corpus: &Corpus, threshold: f64) -> Result<SpeakerFrequencyTable> {
    let rows: BTreeMap<&str, usize> = scores
        .utterance_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    let mut speakers: BTreeMap<String, SpeakerCounts> = BTreeMap::new();
    let mut missing = Vec::new();
    for u in &corpus.utterances {
        let Some(spk) = &u.speaker_id else { continue };
        let Some(&row) = rows.get(u.id.as_str()) else {
            missing.extend(scores.feature_ids.iter().map(|f| (u.id.clone(), f.clone())));
            continue;
        };
        let entry = speakers.entry(spk.clone()).or_insert_with(|| SpeakerCounts {
            utterance_count: 0,
            positive_counts: scores.feature_ids.iter().map(|f| (f.clone(), 0)).collect(),
        });
        entry.utterance_count += 1;
        for (f, &s) in scores.feature_ids.iter().zip(scores.row(row)) {
            if s >= threshold {
                *entry.positive_counts.get_mut(f).unwrap() += 1;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingScores(missing));
    }
    Ok(SpeakerFrequencyTable {
        threshold,
        feature_ids: scores.feature_ids.clone(),
        speakers,
    })
}

impl SpeakerFrequencyTable {
    /// Long-format table: one row per (speaker, feature).
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("speaker_id\tutterance_count\tfeature_id\tpositive_count\tfrequency\n");
        for (spk, c) in &self.speakers {
            for f in &self.feature_ids {
                writeln!(
                    out,
                    "{spk}\t{}\t{f}\t{}\t{}",
                    c.utterance_count,
                    c.positive_counts[f],
                    c.frequency(f).unwrap()
                )
                .unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub speakers: usize,
    /// Mean over the group's speakers of each speaker's mean frequency.
    pub mean: f64,
    /// Sample std of speaker mean frequencies; absent for one speaker.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub factor: String,
    pub features: Vec<String>,
    pub groups: BTreeMap<String, GroupRow>,
    /// Sample std of the group means; absent with fewer than two groups.
    pub between_std: Option<f64>,
    /// Mean of the defined within-group stds.
    pub mean_within_std: Option<f64>,
    /// `mean_within_std > between_std`, when both are defined.
    pub within_exceeds_between: Option<bool>,
    /// Speakers in the table without a value for the factor.
    pub excluded_speakers: usize,
}

fn speaker_means<'a>(
    table: &'a SpeakerFrequencyTable,
    speakers: &'a BTreeMap<String, SpeakerRecord>,
    factor: &str,
    features: &[String],
) -> Result<(Vec<(&'a FactorValue, f64)>, usize)> {
    let mut out = Vec::new();
    let mut excluded = 0;
    for (id, counts) in &table.speakers {
        match speakers.get(id).and_then(|s| s.factors.get(factor)) {
            Some(v) => out.push((v, counts.mean_frequency(features)?)),
            None => excluded += 1,
        }
    }
    Ok((out, excluded))
}

/// Groups speakers by `factor` and summarizes their mean frequency over `features`.
pub fn group_stats(
    table: &SpeakerFrequencyTable,
    speakers: &BTreeMap<String, SpeakerRecord>,
    factor: &str,
    features: &[String],
) -> Result<GroupStats> {
    let (means, excluded) = speaker_means(table, speakers, factor, features)?;
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (v, m) in means {
        by_group.entry(v.to_string()).or_default().push(m);
    }
    let groups: BTreeMap<String, GroupRow> = by_group
        .into_iter()
        .map(|(g, xs)| {
            let row = GroupRow {
                speakers: xs.len(),
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                std: sample_std(&xs),
            };
            (g, row)
        })
        .collect();
    let group_means: Vec<f64> = groups.values().map(|g| g.mean).collect();
    let between_std = sample_std(&group_means);
    let withins: Vec<f64> = groups.values().filter_map(|g| g.std).collect();
    let mean_within_std = (!withins.is_empty()).then(|| withins.iter().sum::<f64>() / withins.len() as f64);
    let within_exceeds_between = match (mean_within_std, between_std) {
        (Some(w), Some(b)) => Some(w > b),
        _ => None,
    };
    Ok(GroupStats {
        factor: factor.to_string(),
        features: features.to_vec(),
        groups,
        between_std,
        mean_within_std,
        within_exceeds_between,
        excluded_speakers: excluded,
    })
}

/// Pearson correlation between an ordinal factor's codes and speaker mean
/// frequency. Absent when either side is constant.
pub fn correlate(
    table: &SpeakerFrequencyTable,
    speakers: &BTreeMap<String, SpeakerRecord>,
    factor: &str,
    features: &[String],
) -> Result<Option<f64>> {
    let (means, _) = speaker_means(table, speakers, factor, features)?;
    let mut xs = Vec::with_capacity(means.len());
    let mut ys = Vec::with_capacity(means.len());
    for (v, m) in means {
        match v {
            FactorValue::Ordinal(code) => xs.push(*code as f64),
            FactorValue::Categorical(_) => {
                return Err(Error::InvalidInput(format!("factor `{factor}` is not ordinal")));
            }
        }
        ys.push(m);
    }
    Ok(pearson(&xs, &ys))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

impl GroupStats {
    pub fn to_tsv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let mut out = String::from("factor\tgroup\tspeakers\tmean\tstd\n");
        for (g, r) in &self.groups {
            writeln!(out, "{}\t{g}\t{}\t{}\t{}", self.factor, r.speakers, r.mean, fmt(r.std)).unwrap();
        }
        out
    }
}

/// Group statistics for every factor in the corpus schema, plus a
/// correlation for ordinal factors, as a plain-text report.
pub fn summary(table: &SpeakerFrequencyTable, corpus: &Corpus, features: &[String]) -> Result<String> {
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.3}", x * 100.0));
    let mut out = String::new();
    writeln!(
        out,
        "features: {}; threshold {}; {} speakers",
        features.join(", "),
        table.threshold,
        table.speakers.len()
    )
    .unwrap();
    for (factor, kind) in &corpus.factor_schema {
        let gs = group_stats(table, &corpus.speakers, factor, features)?;
        writeln!(out, "\n[{factor}] ({} speakers excluded)", gs.excluded_speakers).unwrap();
        for (g, r) in &gs.groups {
            writeln!(out, "  {g:<16} n={:<4} mean%={:<10} std%={}", r.speakers, pct(Some(r.mean)), pct(r.std)).unwrap();
        }
        writeln!(
            out,
            "  between-group std%={}  mean within-group std%={}  within>between={}",
            pct(gs.between_std),
            pct(gs.mean_within_std),
            gs.within_exceeds_between.map_or("-".to_string(), |b| b.to_string())
        )
        .unwrap();
        if *kind == FactorKind::Ordinal {
            let r = correlate(table, &corpus.speakers, factor, features)?;
            writeln!(out, "  pearson r={}", r.map_or("-".to_string(), |r| format!("{r:.4}"))).unwrap();
        }
    }
    Ok(out)
}
