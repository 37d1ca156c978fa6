//! Comparison training sets: hand-written negatives (ManualGen), shuffled
//! n-gram chunks of each seed (AutoGen), and random corpus draws (AutoID).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastSet, Origin};
use crate::corpus::Corpus;
use crate::edit::SeedExample;
use crate::error::{Error, Result};
use crate::hash::mix_seed;
use crate::jsonl;

pub const AUTOGEN_PER_POSITIVE: usize = 3;
pub const AUTOID_PER_POSITIVE: usize = 5;
pub const AUTOGEN_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManualGenRecord {
    pub seed_id: String,
    pub negative_text: String,
}

pub fn load_manualgen(path: &Path, seeds: &[SeedExample]) -> Result<Vec<ContrastSet>> {
    manualgen_sets(&jsonl::read(path)?, seeds)
}

/// One contrast set per feature: every seed (label 1) and its manual
/// negatives (label 0). Features keep the order they first appear in `seeds`.
pub fn manualgen_sets(records: &[ManualGenRecord], seeds: &[SeedExample]) -> Result<Vec<ContrastSet>> {
    let by_id: BTreeMap<&str, &SeedExample> = seeds.iter().map(|s| (s.seed_id.as_str(), s)).collect();
    let mut negatives: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        let seed = by_id.get(r.seed_id.as_str()).ok_or_else(|| Error::UnknownSeed(r.seed_id.clone()))?;
        if r.negative_text.trim() == seed.text.trim() {
            return Err(Error::InvalidInput(format!(
                "manual negative for seed `{}` is identical to the seed",
                r.seed_id
            )));
        }
        negatives.entry(r.seed_id.as_str()).or_default().push(&r.negative_text);
    }

    let mut sets: Vec<ContrastSet> = Vec::new();
    for seed in seeds {
        let negs = negatives
            .get(seed.seed_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("seed `{}` has no manual negative", seed.seed_id)))?;
        let idx = match sets.iter().position(|s| s.feature_id == seed.feature_id) {
            Some(i) => i,
            None => {
                sets.push(ContrastSet::new(seed.feature_id.clone()));
                sets.len() - 1
            }
        };
        sets[idx].insert(seed.text.clone(), 1, Origin::Seed)?;
        for n in negs {
            sets[idx].insert(*n, 0, Origin::Manualgen)?;
        }
    }
    Ok(sets)
}

/// Splits `tokens` left to right into chunks of `n`, the remainder forming
/// one shorter final chunk.
pub fn chunk(tokens: &[String], n: usize) -> Vec<&[String]> {
    tokens.chunks(n.max(1)).collect()
}

/// Up to `count` distinct chunk shuffles of the seed, none equal to it.
///
/// Each attempt draws a chunk size uniformly from `1..=len-2` (just `1` for a
/// two-token seed), chunks, and shuffles the chunks. Gives up after
/// [`AUTOGEN_ATTEMPTS`] attempts.
pub fn autogen_negatives(seed: &SeedExample, rng_seed: u64, count: usize) -> Result<Vec<String>> {
    let toks = &seed.subtokens;
    if toks.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "seed `{}` needs at least 2 subtokens for chunk shuffling",
            seed.seed_id
        )));
    }
    let max_n = toks.len().saturating_sub(2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, &seed.seed_id));
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..AUTOGEN_ATTEMPTS {
        if out.len() == count {
            break;
        }
        let n = rng.gen_range(1..=max_n);
        let mut chunks = chunk(toks, n);
        chunks.shuffle(&mut rng);
        let shuffled: Vec<String> = chunks.concat();
        if shuffled != *toks && seen.insert(shuffled.clone()) {
            out.push(shuffled.join(" "));
        }
    }
    if out.len() < count {
        log::warn!(
            "seed `{}`: only {} distinct shuffle(s) after {AUTOGEN_ATTEMPTS} attempts",
            seed.seed_id,
            out.len()
        );
    }
    Ok(out)
}

/// A corpus utterance drawn as a noisy negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoIdDraw {
    pub utterance_id: String,
    pub text: String,
}

/// Draws `per_positive * seeds.len()` corpus utterances uniformly without
/// replacement. Utterances that equal a seed are never drawn.
pub fn autoid_negatives(corpus: &Corpus, seeds: &[SeedExample], rng_seed: u64, per_positive: usize) -> Vec<AutoIdDraw> {
    let seed_texts: HashSet<&str> = seeds.iter().map(|s| s.text.as_str()).collect();
    let seed_toks: HashSet<&[String]> = seeds.iter().map(|s| s.subtokens.as_slice()).collect();
    let pool: Vec<_> = corpus
        .utterances
        .iter()
        .filter(|u| !seed_texts.contains(u.text.as_str()) && !seed_toks.contains(u.subtokens.as_slice()))
        .collect();

    let wanted = per_positive * seeds.len();
    if wanted > pool.len() {
        log::warn!("requested {wanted} AutoID negatives but only {} eligible utterances", pool.len());
    }
    let stream = seeds.first().map_or("", |s| s.feature_id.as_str());
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, stream));
    rand::seq::index::sample(&mut rng, pool.len(), wanted.min(pool.len()))
        .into_iter()
        .map(|i| AutoIdDraw {
            utterance_id: pool[i].id.clone(),
            text: pool[i].text.clone(),
        })
        .collect()
}

fn group_by_feature(seeds: &[SeedExample]) -> Vec<(String, Vec<SeedExample>)> {
    let mut out: Vec<(String, Vec<SeedExample>)> = Vec::new();
    for s in seeds {
        match out.iter_mut().find(|(f, _)| *f == s.feature_id) {
            Some((_, v)) => v.push(s.clone()),
            None => out.push((s.feature_id.clone(), vec![s.clone()])),
        }
    }
    out
}

/// Seeds plus AutoGen negatives, one set per feature.
pub fn autogen_sets(seeds: &[SeedExample], rng_seed: u64, per_positive: usize) -> Result<Vec<ContrastSet>> {
    group_by_feature(seeds)
        .into_iter()
        .map(|(feature, group)| {
            let mut set = ContrastSet::new(feature);
            for s in &group {
                set.insert(s.text.clone(), 1, Origin::Seed)?;
            }
            for s in &group {
                for neg in autogen_negatives(s, rng_seed, per_positive)? {
                    // a shuffle can coincide with another seed of the same feature
                    if group.iter().any(|g| g.subtokens.join(" ") == neg) {
                        continue;
                    }
                    set.insert(neg, 0, Origin::Autogen)?;
                }
            }
            Ok(set)
        })
        .collect()
}

/// Seeds plus AutoID negatives, one set per feature.
pub fn autoid_sets(corpus: &Corpus, seeds: &[SeedExample], rng_seed: u64, per_positive: usize) -> Result<Vec<ContrastSet>> {
    group_by_feature(seeds)
        .into_iter()
        .map(|(feature, group)| {
            let mut set = ContrastSet::new(feature);
            for s in &group {
                set.insert(s.text.clone(), 1, Origin::Seed)?;
            }
            for d in autoid_negatives(corpus, &group, rng_seed, per_positive) {
                set.insert(d.text, 0, Origin::Autoid)?;
            }
            Ok(set)
        })
        .collect()
}

/// Token multiset, for checking that a shuffle is a permutation.
pub fn token_multiset(text: &str) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for t in text.split_whitespace() {
        *m.entry(t).or_default() += 1;
    }
    m
}
