use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Corpus, TokenizerProfile};
use crate::error::{Error, Result};

pub type NGram = Vec<String>;

pub const DEFAULT_ORDERS: [usize; 3] = [2, 3, 4];

const NGRAMS_FILE: &str = "ngrams.tsv";
const META_FILE: &str = "index.json";

/// Exact counts of overlapping in-utterance n-grams with per-subtoken postings.
///
/// N-grams are stored once, sorted by `(n, tokens)`; postings hold positions
/// into that list so lookups by subtoken are cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramIndex {
    orders: BTreeSet<usize>,
    grams: Vec<(NGram, u64)>,
    lookup: HashMap<NGram, usize>,
    postings: HashMap<String, Vec<usize>>,
    total_utterances: usize,
    profile: TokenizerProfile,
}

#[derive(Serialize, Deserialize)]
struct IndexMeta {
    orders: Vec<usize>,
    total_utterances: usize,
    distinct_ngrams: usize,
    tokenizer_profile: TokenizerProfile,
}

fn count_chunk<'a>(utterances: impl Iterator<Item = &'a [String]>, orders: &BTreeSet<usize>) -> HashMap<NGram, u64> {
    let mut counts: HashMap<NGram, u64> = HashMap::new();
    for toks in utterances {
        for &n in orders {
            for w in toks.windows(n) {
                *counts.entry(w.to_vec()).or_default() += 1;
            }
        }
    }
    counts
}

impl NGramIndex {
    pub fn build(corpus: &Corpus, orders: &[usize]) -> Result<Self> {
        let orders: BTreeSet<usize> = orders.iter().copied().collect();
        if let Some(bad) = orders.iter().find(|n| !DEFAULT_ORDERS.contains(n)) {
            return Err(Error::InvalidInput(format!("n-gram order {bad} is not one of 2, 3, 4")));
        }
        let counts = corpus
            .utterances
            .par_chunks(4096)
            .map(|chunk| count_chunk(chunk.iter().map(|u| u.subtokens.as_slice()), &orders))
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            });
        Ok(Self::from_counts(orders, counts, corpus.len(), corpus.tokenizer_profile))
    }

    /// Single-threaded reference build, used to check the parallel path.
    pub fn build_sequential(corpus: &Corpus, orders: &[usize]) -> Result<Self> {
        let orders: BTreeSet<usize> = orders.iter().copied().collect();
        if let Some(bad) = orders.iter().find(|n| !DEFAULT_ORDERS.contains(n)) {
            return Err(Error::InvalidInput(format!("n-gram order {bad} is not one of 2, 3, 4")));
        }
        let counts = count_chunk(corpus.utterances.iter().map(|u| u.subtokens.as_slice()), &orders);
        Ok(Self::from_counts(orders, counts, corpus.len(), corpus.tokenizer_profile))
    }

    fn from_counts(
        orders: BTreeSet<usize>,
        counts: HashMap<NGram, u64>,
        total_utterances: usize,
        profile: TokenizerProfile,
    ) -> Self {
        let mut grams: Vec<(NGram, u64)> = counts.into_iter().collect();
        grams.sort_unstable_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));

        let mut lookup = HashMap::with_capacity(grams.len());
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, (g, _)) in grams.iter().enumerate() {
            lookup.insert(g.clone(), i);
            let members: BTreeSet<&String> = g.iter().collect();
            for s in members {
                postings.entry(s.clone()).or_default().push(i);
            }
        }
        NGramIndex {
            orders,
            grams,
            lookup,
            postings,
            total_utterances,
            profile,
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        self.orders.iter().copied()
    }

    pub fn total_utterances(&self) -> usize {
        self.total_utterances
    }

    pub fn tokenizer_profile(&self) -> TokenizerProfile {
        self.profile
    }

    /// Number of distinct n-grams across all orders.
    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn count<S: AsRef<str>>(&self, gram: &[S]) -> u64 {
        let key: NGram = gram.iter().map(|s| s.as_ref().to_string()).collect();
        self.lookup.get(&key).map_or(0, |&i| self.grams[i].1)
    }

    /// All indexed n-grams in `(n, tokens)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&[String], u64)> {
        self.grams.iter().map(|(g, c)| (g.as_slice(), *c))
    }

    pub fn ngrams_of_order(&self, n: usize) -> impl Iterator<Item = (&[String], u64)> {
        let start = self.grams.partition_point(|(g, _)| g.len() < n);
        let end = self.grams.partition_point(|(g, _)| g.len() <= n);
        self.grams[start..end].iter().map(|(g, c)| (g.as_slice(), *c))
    }

    /// N-grams (of any order) that contain `token`.
    pub fn postings(&self, token: &str) -> impl Iterator<Item = (&[String], u64)> {
        self.postings
            .get(token)
            .into_iter()
            .flatten()
            .map(|&i| (self.grams[i].0.as_slice(), self.grams[i].1))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut body = String::new();
        for (g, c) in &self.grams {
            writeln!(body, "{}\t{}\t{}", g.len(), c, g.join(" ")).unwrap();
        }
        let path = dir.join(NGRAMS_FILE);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;

        let meta = IndexMeta {
            orders: self.orders.iter().copied().collect(),
            total_utterances: self.total_utterances,
            distinct_ngrams: self.grams.len(),
            tokenizer_profile: self.profile,
        };
        let path = dir.join(META_FILE);
        let json = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: IndexMeta = serde_json::from_str(&meta_text).map_err(|e| Error::parse(&meta_path, 1, e.to_string()))?;

        let path = dir.join(NGRAMS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut counts = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.splitn(3, '\t');
            let (Some(n), Some(c), Some(toks)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(&path, i + 1, "expected `n<TAB>count<TAB>tokens`"));
            };
            let n: usize = n.parse().map_err(|_| Error::parse(&path, i + 1, "bad order"))?;
            let c: u64 = c.parse().map_err(|_| Error::parse(&path, i + 1, "bad count"))?;
            let gram: NGram = toks.split(' ').map(String::from).collect();
            if gram.len() != n {
                return Err(Error::parse(&path, i + 1, "order does not match token count"));
            }
            counts.insert(gram, c);
        }
        Ok(Self::from_counts(
            meta.orders.into_iter().collect(),
            counts,
            meta.total_utterances,
            meta.tokenizer_profile,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(
            texts.iter().enumerate().map(|(i, t)| (format!("u{i}"), t.to_string(), None)),
            TokenizerProfile::CASED,
        )
        .unwrap()
    }

    #[test]
    fn enumerates_overlapping_ngrams() {
        let idx = NGramIndex::build(&corpus(&["a b c"]), &[2, 3]).unwrap();
        let all: Vec<(Vec<String>, u64)> = idx.iter().map(|(g, c)| (g.to_vec(), c)).collect();
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(all, vec![(s(&["a", "b"]), 1), (s(&["b", "c"]), 1), (s(&["a", "b", "c"]), 1)]);
    }

    #[test]
    fn repeated_utterance_doubles_counts() {
        let idx = NGramIndex::build(&corpus(&["a b c", "a b c"]), &[2, 3]).unwrap();
        assert!(idx.iter().all(|(_, c)| c == 2));
        assert_eq!(idx.len(), 3);
    }

    #[test]
    fn short_utterance_contributes_nothing() {
        let idx = NGramIndex::build(&corpus(&["a"]), &[2]).unwrap();
        assert!(idx.is_empty());
    }

    #[test]
    fn no_cross_utterance_ngrams() {
        let idx = NGramIndex::build(&corpus(&["a b", "c d"]), &[2, 3]).unwrap();
        assert_eq!(idx.count(&["b", "c"]), 0);
        assert_eq!(idx.ngrams_of_order(3).count(), 0);
    }

    #[test]
    fn rejects_unsupported_order() {
        assert!(NGramIndex::build(&corpus(&["a b"]), &[5]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let idx = NGramIndex::build(&corpus(&["he on the five dollar", "was on the dollar bill ."]), &DEFAULT_ORDERS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        idx.save(dir.path()).unwrap();
        assert_eq!(NGramIndex::load(dir.path()).unwrap(), idx);
    }

    proptest! {
        #[test]
        fn trigram_total_and_postings(texts in proptest::collection::vec("[abcd ]{0,12}", 0..30)) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let c = corpus(&refs);
            let idx = NGramIndex::build(&c, &DEFAULT_ORDERS).unwrap();

            let total: u64 = idx.ngrams_of_order(3).map(|(_, n)| n).sum();
            let expected: usize = c.utterances.iter().map(|u| u.subtokens.len().saturating_sub(2)).sum();
            prop_assert_eq!(total, expected as u64);

            for (g, _) in idx.iter() {
                for s in g {
                    prop_assert!(idx.postings(s).any(|(p, _)| p == g));
                }
            }

            prop_assert_eq!(&idx, &NGramIndex::build_sequential(&c, &DEFAULT_ORDERS).unwrap());
            prop_assert_eq!(&idx, &NGramIndex::build(&c, &DEFAULT_ORDERS).unwrap());
        }
    }
}
