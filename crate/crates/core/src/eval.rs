//! Ranking metrics (ROC-AUC, average precision, precision@k), top-k
//! extraction for manual annotation, and aggregation over runs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ScoreMatrix;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::jsonl;

pub const DEFAULT_K: usize = 100;

/// Parallel scores and binary labels for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidInput("labels must be 0 or 1".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidInput("NaN score".into()));
        }
        Ok(LabeledScores { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Indices by score descending; ties keep input order.
    fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].partial_cmp(&self.scores[a]).unwrap_or(Ordering::Equal));
        idx
    }
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann-Whitney U over midranks).
pub fn roc_auc(ls: &LabeledScores) -> Result<f64> {
    let p = ls.positives();
    let n = ls.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass("ROC-AUC needs both positives and negatives".into()));
    }
    let mut idx: Vec<usize> = (0..ls.len()).collect();
    idx.sort_by(|&a, &b| ls.scores[a].partial_cmp(&ls.scores[b]).unwrap_or(Ordering::Equal));

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && ls.scores[idx[j + 1]] == ls.scores[idx[i]] {
            j += 1;
        }
        // 1-based midrank of the tie block i..=j
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = idx[i..=j].iter().filter(|&&k| ls.labels[k] == 1).count();
        positive_rank_sum += midrank * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (p as f64, n as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean, over positives in ranking order, of precision at that positive's rank.
pub fn average_precision(ls: &LabeledScores) -> Result<f64> {
    let p = ls.positives();
    if p == 0 {
        return Err(Error::SingleClass("average precision needs at least one positive".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in ls.ranking().iter().enumerate() {
        if ls.labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / p as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtK {
    pub value: f64,
    pub k: usize,
    /// Items actually ranked: `min(k, len)`.
    pub evaluated: usize,
    /// Attainable maximum `min(1, P/k)`.
    pub upper_bound: f64,
    /// Fewer than `k` items were available.
    pub short: bool,
}

/// Positives among the top `k` by score, divided by `k`. With fewer than
/// `k` items the missing ranks count as misses and the result is flagged.
pub fn precision_at_k(ls: &LabeledScores, k: usize) -> Result<PrecisionAtK> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let evaluated = k.min(ls.len());
    let hits = ls.ranking()[..evaluated].iter().filter(|&&i| ls.labels[i] == 1).count();
    Ok(PrecisionAtK {
        value: hits as f64 / k as f64,
        k,
        evaluated,
        upper_bound: (ls.positives() as f64 / k as f64).min(1.0),
        short: ls.len() < k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUtterance {
    pub rank: usize,
    pub utterance_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub feature_id: String,
    pub k: usize,
    pub items: Vec<RankedUtterance>,
    /// The corpus had fewer than `k` utterances.
    pub short: bool,
}

/// Top `k` utterances for a feature, score descending, ties to the lower id.
pub fn rank_top_k(scores: &ScoreMatrix, feature_id: &str, k: usize) -> Result<TopK> {
    let mut col = scores.column(feature_id)?;
    col.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0)));
    let short = col.len() < k;
    Ok(TopK {
        feature_id: feature_id.to_string(),
        k,
        short,
        items: col
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (id, score))| RankedUtterance {
                rank: i + 1,
                utterance_id: id.to_string(),
                score,
            })
            .collect(),
    })
}

/// One row of a manual-annotation sheet; `label` is left blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetRow {
    pub rank: usize,
    pub feature_id: String,
    pub utterance_id: String,
    pub text: String,
    pub score: f64,
    pub label: Option<u8>,
}

pub fn annotation_sheet(top: &TopK, corpus: &Corpus) -> Result<Vec<SheetRow>> {
    let texts: BTreeMap<&str, &str> = corpus.utterances.iter().map(|u| (u.id.as_str(), u.text.as_str())).collect();
    top.items
        .iter()
        .map(|r| {
            let text = texts
                .get(r.utterance_id.as_str())
                .ok_or_else(|| Error::UnknownUtterance(r.utterance_id.clone()))?;
            Ok(SheetRow {
                rank: r.rank,
                feature_id: top.feature_id.clone(),
                utterance_id: r.utterance_id.clone(),
                text: text.to_string(),
                score: r.score,
                label: None,
            })
        })
        .collect()
}

/// Gold label for one (utterance, feature) cell. Filled annotation sheets
/// parse as gold records too.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub utterance_id: String,
    pub feature_id: String,
    pub label: u8,
}

/// Reads gold labels from TSV (`utterance_id feature_id label`, `.tsv`) or JSON lines.
pub fn read_gold(path: &Path) -> Result<Vec<GoldRecord>> {
    if path.extension().is_some_and(|e| e == "tsv") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (i == 0 && line.starts_with("utterance_id")) {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [u, f, l] = cols[..] else {
                return Err(Error::parse(path, i + 1, "expected 3 tab-separated columns"));
            };
            let label = match l.trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::parse(path, i + 1, format!("label `{other}` is not 0 or 1"))),
            };
            out.push(GoldRecord {
                utterance_id: u.to_string(),
                feature_id: f.to_string(),
                label,
            });
        }
        return Ok(out);
    }
    #[derive(Deserialize)]
    struct Loose {
        utterance_id: String,
        feature_id: String,
        label: Option<u8>,
    }
    let rows: Vec<Loose> = jsonl::read(path)?;
    let mut out = Vec::new();
    for r in rows {
        match r.label {
            Some(l @ (0 | 1)) => out.push(GoldRecord {
                utterance_id: r.utterance_id,
                feature_id: r.feature_id,
                label: l,
            }),
            Some(l) => return Err(Error::InvalidInput(format!("label {l} is not 0 or 1"))),
            // unlabeled sheet rows are skipped
            None => {}
        }
    }
    Ok(out)
}

/// Pairs each gold-labeled utterance with its score for one feature.
pub fn labeled_scores(scores: &ScoreMatrix, gold: &[GoldRecord], feature_id: &str) -> Result<LabeledScores> {
    let col = scores
        .feature_index(feature_id)
        .ok_or_else(|| Error::UnknownFeature(feature_id.to_string()))?;
    let rows: BTreeMap<&str, usize> = scores
        .utterance_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    let mut s = Vec::new();
    let mut l = Vec::new();
    for g in gold.iter().filter(|g| g.feature_id == feature_id) {
        let r = *rows
            .get(g.utterance_id.as_str())
            .ok_or_else(|| Error::UnknownUtterance(g.utterance_id.clone()))?;
        s.push(scores.get(r, col));
        l.push(g.label);
    }
    LabeledScores::new(s, l)
}

/// Metric values for one feature; a metric is absent when undefined
/// (e.g. ROC-AUC on single-class gold).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetrics {
    pub roc_auc: Option<f64>,
    pub average_precision: Option<f64>,
    pub precision_at_k: Option<f64>,
}

impl FeatureMetrics {
    pub fn of(ls: &LabeledScores, k: usize) -> Result<Self> {
        Ok(FeatureMetrics {
            roc_auc: roc_auc(ls).ok(),
            average_precision: average_precision(ls).ok(),
            precision_at_k: if ls.is_empty() { None } else { Some(precision_at_k(ls, k)?.value) },
        })
    }

    fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::RocAuc => self.roc_auc,
            Metric::AveragePrecision => self.average_precision,
            Metric::PrecisionAtK => self.precision_at_k,
        }
    }

    fn set(&mut self, m: Metric, v: Option<f64>) {
        match m {
            Metric::RocAuc => self.roc_auc = v,
            Metric::AveragePrecision => self.average_precision = v,
            Metric::PrecisionAtK => self.precision_at_k = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RocAuc,
    AveragePrecision,
    PrecisionAtK,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::RocAuc, Metric::AveragePrecision, Metric::PrecisionAtK];

    pub fn name(self, k: usize) -> String {
        match self {
            Metric::RocAuc => "roc_auc".into(),
            Metric::AveragePrecision => "ap".into(),
            Metric::PrecisionAtK => format!("prec_at_{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub features: BTreeMap<String, FeatureMetrics>,
    pub macro_average: FeatureMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub runs: Vec<RunMetrics>,
    pub mean: BTreeMap<String, FeatureMetrics>,
    /// Sample standard deviation across runs; absent with a single run.
    pub std: BTreeMap<String, FeatureMetrics>,
    pub macro_mean: FeatureMetrics,
    pub macro_std: FeatureMetrics,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample (n-1) standard deviation; absent for fewer than two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

fn macro_average(features: &BTreeMap<String, FeatureMetrics>) -> FeatureMetrics {
    let mut out = FeatureMetrics::default();
    for m in Metric::ALL {
        let vals: Vec<f64> = features.values().filter_map(|f| f.get(m)).collect();
        out.set(m, mean(&vals));
    }
    out
}

impl RunMetrics {
    pub fn new(features: BTreeMap<String, FeatureMetrics>) -> Self {
        let macro_average = macro_average(&features);
        RunMetrics { features, macro_average }
    }
}

/// Metrics for every feature of one scored run against gold labels.
pub fn evaluate_run(scores: &ScoreMatrix, gold: &[GoldRecord], features: &[String], k: usize) -> Result<RunMetrics> {
    let mut out = BTreeMap::new();
    for f in features {
        let ls = labeled_scores(scores, gold, f)?;
        out.insert(f.clone(), FeatureMetrics::of(&ls, k)?);
    }
    Ok(RunMetrics::new(out))
}

impl MetricReport {
    pub fn from_runs(k: usize, runs: Vec<RunMetrics>) -> Result<Self> {
        let Some(first) = runs.first() else {
            return Err(Error::ReportMismatch("no runs".into()));
        };
        let features: BTreeSet<&String> = first.features.keys().collect();
        for r in &runs[1..] {
            if r.features.keys().collect::<BTreeSet<_>>() != features {
                return Err(Error::ReportMismatch("runs cover different feature sets".into()));
            }
        }
        let mut mean_map = BTreeMap::new();
        let mut std_map = BTreeMap::new();
        for f in &features {
            let mut m_out = FeatureMetrics::default();
            let mut s_out = FeatureMetrics::default();
            for m in Metric::ALL {
                let vals: Vec<f64> = runs.iter().filter_map(|r| r.features[*f].get(m)).collect();
                m_out.set(m, mean(&vals));
                s_out.set(m, sample_std(&vals));
            }
            mean_map.insert((*f).clone(), m_out);
            std_map.insert((*f).clone(), s_out);
        }
        let mut macro_mean = FeatureMetrics::default();
        let mut macro_std = FeatureMetrics::default();
        for m in Metric::ALL {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.macro_average.get(m)).collect();
            macro_mean.set(m, mean(&vals));
            macro_std.set(m, sample_std(&vals));
        }
        Ok(MetricReport {
            k,
            runs,
            mean: mean_map,
            std: std_map,
            macro_mean,
            macro_std,
        })
    }

    /// Machine-readable `feature metric mean std` table.
    pub fn to_tsv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let mut out = String::from("feature\tmetric\tmean\tstd\n");
        let rows = self
            .mean
            .iter()
            .map(|(f, m)| (f.as_str(), m, &self.std[f]))
            .chain(std::iter::once(("MACRO", &self.macro_mean, &self.macro_std)));
        for (f, m, s) in rows {
            for metric in Metric::ALL {
                writeln!(out, "{f}\t{}\t{}\t{}", metric.name(self.k), fmt(m.get(metric)), fmt(s.get(metric))).unwrap();
            }
        }
        out
    }

    /// Human-readable table in percentages, `mean ± std` per cell.
    pub fn to_table(&self) -> String {
        let cell = |m: Option<f64>, s: Option<f64>| match (m, s) {
            (Some(m), Some(s)) => format!("{:.2} ± {:.2}", m * 100.0, s * 100.0),
            (Some(m), None) => format!("{:.2}", m * 100.0),
            _ => "-".to_string(),
        };
        let width = self.mean.keys().map(String::len).max().unwrap_or(7).max(7);
        let mut out = String::new();
        writeln!(
            out,
            "{:<width$}  {:>16}  {:>16}  {:>16}",
            "Feature",
            "ROC-AUC",
            "AP",
            format!("Prec@{}", self.k)
        )
        .unwrap();
        let rows = self
            .mean
            .iter()
            .map(|(f, m)| (f.as_str(), m, &self.std[f]))
            .chain(std::iter::once(("Average", &self.macro_mean, &self.macro_std)));
        for (f, m, s) in rows {
            writeln!(
                out,
                "{:<width$}  {:>16}  {:>16}  {:>16}",
                f,
                cell(m.roc_auc, s.roc_auc),
                cell(m.average_precision, s.average_precision),
                cell(m.precision_at_k, s.precision_at_k),
            )
            .unwrap();
        }
        writeln!(out, "({} run(s); values in percent)", self.runs.len()).unwrap();
        out
    }
}

/// Pools the runs of several reports into one.
pub fn aggregate_runs(reports: &[MetricReport]) -> Result<MetricReport> {
    let Some(first) = reports.first() else {
        return Err(Error::ReportMismatch("no reports".into()));
    };
    if reports.iter().any(|r| r.k != first.k) {
        return Err(Error::ReportMismatch("reports use different k".into()));
    }
    MetricReport::from_runs(first.k, reports.iter().flat_map(|r| r.runs.clone()).collect())
}
