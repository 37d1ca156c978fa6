//! Corpus-guided edits: every 3-gram window of a seed positive is swapped for
//! frequent corpus 2/3/4-grams that differ from it by at most one subtoken in
//! each direction.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, NGram, NGramIndex, TokenizerProfile, DEFAULT_ORDERS};
use crate::error::{Error, Result};
use crate::hash::mix_seed;
use crate::jsonl;

pub const WINDOW_LEN: usize = 3;
pub const REPLACEMENTS_PER_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedExample {
    pub seed_id: String,
    pub feature_id: String,
    pub text: String,
    pub subtokens: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed_id: String,
    pub feature_id: String,
    pub text: String,
}

impl SeedExample {
    pub fn new(seed_id: impl Into<String>, feature_id: impl Into<String>, text: impl Into<String>, profile: TokenizerProfile) -> Self {
        let text = text.into();
        SeedExample {
            seed_id: seed_id.into(),
            feature_id: feature_id.into(),
            subtokens: tokenize(&text, profile),
            text,
        }
    }
}

/// Loads a seed file. Warns for every feature that does not have exactly five seeds.
pub fn load_seeds(path: &Path, profile: TokenizerProfile) -> Result<Vec<SeedExample>> {
    let records: Vec<SeedRecord> = jsonl::read(path)?;
    let mut ids = BTreeSet::new();
    let mut per_feature: HashMap<&str, usize> = HashMap::new();
    for r in &records {
        if !ids.insert(r.seed_id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate seed id `{}`", r.seed_id)));
        }
        *per_feature.entry(r.feature_id.as_str()).or_default() += 1;
    }
    let mut counts: Vec<_> = per_feature.into_iter().collect();
    counts.sort_unstable();
    for (feature, n) in counts {
        if n != 5 {
            log::warn!("feature `{feature}` has {n} seed(s); the protocol expects 5");
        }
    }
    Ok(records
        .into_iter()
        .map(|r| SeedExample::new(r.seed_id, r.feature_id, r.text, profile))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub span: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateStatus {
    Unlabeled,
    Positive,
    Negative,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEdit {
    pub candidate_id: String,
    pub seed_id: String,
    pub window: Window,
    pub replacement: NGram,
    pub perturbed_subtokens: Vec<String>,
    pub perturbed_text: String,
    pub corpus_frequency: u64,
    pub status: CandidateStatus,
}

/// Overlapping 3-token windows; seeds of one or two tokens get a single
/// window spanning the whole seed.
pub fn extract_windows(seed: &SeedExample) -> Result<Vec<Window>> {
    let toks = &seed.subtokens;
    if toks.is_empty() {
        return Err(Error::InvalidInput(format!("seed `{}` has no subtokens", seed.seed_id)));
    }
    if toks.len() < WINDOW_LEN {
        return Ok(vec![Window { start: 0, span: toks.clone() }]);
    }
    Ok(toks
        .windows(WINDOW_LEN)
        .enumerate()
        .map(|(start, w)| Window { start, span: w.to_vec() })
        .collect())
}

/// Both directional subtoken-set differences have at most one element.
pub fn within_one_subtoken<S: AsRef<str>, T: AsRef<str>>(t: &[S], t_prime: &[T]) -> bool {
    let a: BTreeSet<&str> = t.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = t_prime.iter().map(AsRef::as_ref).collect();
    a.difference(&b).count() <= 1 && b.difference(&a).count() <= 1
}

/// Whether `t_prime` is an admissible replacement for `t`: within one subtoken
/// each way and not the identical sequence.
pub fn admissible<S: AsRef<str>, T: AsRef<str>>(t: &[S], t_prime: &[T]) -> bool {
    let identical = t.len() == t_prime.len() && t.iter().zip(t_prime).all(|(x, y)| x.as_ref() == y.as_ref());
    !identical && within_one_subtoken(t, t_prime)
}

/// The up-to-three most frequent admissible corpus n-grams of order `n`,
/// count descending, ties broken lexicographically.
pub fn candidate_replacements<S: AsRef<str>>(index: &NGramIndex, t: &[S], n: usize) -> Vec<(NGram, u64)> {
    let members: BTreeSet<&str> = t.iter().map(AsRef::as_ref).collect();
    let mut pool: Vec<(&[String], u64)> = if members.len() == 1 {
        // a uniform t' sharing no token with a uniform t can still qualify
        index.ngrams_of_order(n).collect()
    } else {
        let mut seen = BTreeSet::new();
        members
            .iter()
            .flat_map(|s| index.postings(s))
            .filter(|(g, _)| g.len() == n && seen.insert(*g))
            .collect()
    };
    pool.retain(|(g, _)| admissible(t, g));
    pool.sort_unstable_by(|a, b| (Reverse(a.1), a.0).cmp(&(Reverse(b.1), b.0)));
    pool.truncate(REPLACEMENTS_PER_ORDER);
    pool.into_iter().map(|(g, c)| (g.to_vec(), c)).collect()
}

/// All single-window perturbations of `seed`, deduplicated and shuffled.
pub fn generate_candidates(seed: &SeedExample, index: &NGramIndex, rng_seed: u64) -> Result<Vec<CandidateEdit>> {
    let windows = extract_windows(seed)?;
    let orders: Vec<usize> = DEFAULT_ORDERS.iter().copied().filter(|n| index.orders().any(|m| m == *n)).collect();

    let mut raw = Vec::new();
    for w in &windows {
        let prefix = &seed.subtokens[..w.start];
        let suffix = &seed.subtokens[w.start + w.span.len()..];
        for &n in &orders {
            for (replacement, count) in candidate_replacements(index, &w.span, n) {
                let perturbed: Vec<String> = prefix.iter().chain(&replacement).chain(suffix).cloned().collect();
                if perturbed == seed.subtokens {
                    continue;
                }
                raw.push((perturbed, w.clone(), replacement, count));
            }
        }
    }

    // highest-frequency provenance wins when two edits yield the same tokens
    raw.sort_by(|a, b| {
        (Reverse(a.3), &a.2, a.1.start).cmp(&(Reverse(b.3), &b.2, b.1.start))
    });
    let mut seen = BTreeSet::new();
    raw.retain(|c| seen.insert(c.0.clone()));
    raw.sort_by(|a, b| a.0.cmp(&b.0));

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, &seed.seed_id));
    raw.shuffle(&mut rng);

    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, (perturbed, window, replacement, count))| CandidateEdit {
            candidate_id: format!("{}:{i}", seed.seed_id),
            seed_id: seed.seed_id.clone(),
            window,
            replacement,
            perturbed_text: perturbed.join(" "),
            perturbed_subtokens: perturbed,
            corpus_frequency: count,
            status: CandidateStatus::Unlabeled,
        })
        .collect())
}

/// Runs [`generate_candidates`] for each seed in parallel; output keeps seed order.
pub fn generate_all(seeds: &[SeedExample], index: &NGramIndex, rng_seed: u64) -> Result<Vec<CandidateEdit>> {
    let per_seed: Result<Vec<Vec<CandidateEdit>>> =
        seeds.par_iter().map(|s| generate_candidates(s, index, rng_seed)).collect();
    Ok(per_seed?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use proptest::prelude::*;

    fn idx(texts: &[&str]) -> NGramIndex {
        let c = Corpus::from_texts(
            texts.iter().enumerate().map(|(i, t)| (format!("u{i}"), t.to_string(), None)),
            TokenizerProfile::CASED,
        )
        .unwrap();
        NGramIndex::build(&c, &DEFAULT_ORDERS).unwrap()
    }

    fn seed(text: &str) -> SeedExample {
        SeedExample::new("s1", "zero_copula", text, TokenizerProfile::CASED)
    }

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn windows() {
        let w = extract_windows(&seed("he on the five dollar")).unwrap();
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(w[1].span, ["on", "the", "five"]);
        assert_eq!(extract_windows(&seed("a b c")).unwrap().len(), 1);
        let short = extract_windows(&seed("a b")).unwrap();
        assert_eq!(short, vec![Window { start: 0, span: v(&["a", "b"]) }]);
        assert!(extract_windows(&seed("")).is_err());
    }

    #[test]
    fn constraint_examples() {
        let t = ["on", "the", "five"];
        assert!(admissible(&t, &["on", "the"]));
        assert!(!admissible(&t, &["at", "my", "house"]));
        assert!(admissible(&t, &["the", "on", "five"]));
        assert!(!admissible(&t, &t));
    }

    #[test]
    fn replacements_ranked_by_count_then_lexicographically() {
        // (a,b) x5, (b,c) x3, (a,c) x1
        let mut texts = vec!["a b"; 5];
        texts.extend(["b c"; 3]);
        texts.push("a c");
        let r = candidate_replacements(&idx(&texts), &["a", "b", "c"], 2);
        assert_eq!(r, vec![(v(&["a", "b"]), 5), (v(&["b", "c"]), 3), (v(&["a", "c"]), 1)]);

        let r = candidate_replacements(&idx(&["x y", "b a", "a b", "q r"]), &["a", "b", "c"], 2);
        assert_eq!(r, vec![(v(&["a", "b"]), 1), (v(&["b", "a"]), 1)]);
    }

    #[test]
    fn uniform_windows_see_uniform_replacements() {
        let r = candidate_replacements(&idx(&["b b"]), &["a", "a", "a"], 2);
        assert_eq!(r, vec![(v(&["b", "b"]), 1)]);
    }

    #[test]
    fn empty_index_gives_nothing() {
        assert!(generate_candidates(&seed("he on the five dollar"), &idx(&[]), 1).unwrap().is_empty());
    }

    #[test]
    fn deterministic_given_rng_seed() {
        let i = idx(&["he was on the dollar", "on the other five dollar bill", "the five hundred dollar"]);
        let s = seed("he on the five dollar");
        let a = generate_candidates(&s, &i, 7).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, generate_candidates(&s, &i, 7).unwrap());
    }

    #[test]
    fn dedup_keeps_most_frequent_provenance() {
        // "x b c" reachable via window 0 only; (a,b,c)->(x,b,c) over two routes is impossible
        // here, so force it through orders: (b) deletion from both windows of "a b c d"
        let i = idx(&["b c d", "a b d", "a b d"]);
        let s = seed("a b c d");
        let out = generate_candidates(&s, &i, 0).unwrap();
        let mut texts: Vec<_> = out.iter().map(|c| c.perturbed_text.clone()).collect();
        let n = texts.len();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), n);
        let abd = out.iter().find(|c| c.perturbed_text == "a b d").unwrap();
        assert_eq!(abd.corpus_frequency, 2);
    }

    proptest! {
        #[test]
        fn candidates_are_local_constrained_and_frequent(
            corpus in proptest::collection::vec("[abcde]( [abcde]){0,6}", 1..25),
            seed_text in "[abcde]( [abcde]){0,6}",
            rng in any::<u64>(),
        ) {
            let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
            let index = idx(&refs);
            let s = seed(&seed_text);
            let out = generate_candidates(&s, &index, rng).unwrap();
            for c in &out {
                let w = &c.window;
                let prefix = &s.subtokens[..w.start];
                let suffix = &s.subtokens[w.start + w.span.len()..];
                prop_assert_eq!(&c.perturbed_subtokens[..prefix.len()], prefix);
                prop_assert_eq!(&c.perturbed_subtokens[prefix.len()..prefix.len() + c.replacement.len()], &c.replacement[..]);
                prop_assert_eq!(&c.perturbed_subtokens[prefix.len() + c.replacement.len()..], suffix);
                prop_assert!(within_one_subtoken(&w.span, &c.replacement));
                prop_assert!(c.perturbed_subtokens != s.subtokens);
                prop_assert!(c.corpus_frequency >= 1);
                prop_assert_eq!(index.count(&c.replacement), c.corpus_frequency);
            }
            // top-k: nothing admissible outside the chosen set beats a chosen one
            for w in extract_windows(&s).unwrap() {
                for n in DEFAULT_ORDERS {
                    let chosen = candidate_replacements(&index, &w.span, n);
                    let Some(min) = chosen.iter().map(|c| c.1).min() else { continue };
                    for (g, count) in index.ngrams_of_order(n) {
                        if admissible(&w.span, g) && !chosen.iter().any(|c| c.0 == g) {
                            prop_assert!(count <= min);
                        }
                    }
                }
            }
        }
    }
}
