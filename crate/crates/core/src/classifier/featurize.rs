use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, TokenizerProfile};
use crate::hash::Fnv64;

pub const DEFAULT_HASH_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub hash_bits: u32,
    pub tokenizer_profile: TokenizerProfile,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            hash_bits: DEFAULT_HASH_BITS,
            tokenizer_profile: TokenizerProfile::CASED,
        }
    }
}

impl FeaturizerConfig {
    pub fn dimensions(&self) -> u32 {
        1 << self.hash_bits
    }
}

/// Binary presence vector over the hashed feature space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Sorted, deduplicated active dimensions. Every active dimension has weight 1.
    pub indices: Vec<u32>,
    pub dimensions: u32,
}

impl FeatureVector {
    pub fn weight(&self, index: u32) -> f64 {
        if self.indices.binary_search(&index).is_ok() {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

fn slot(kind: &str, parts: &[&str], mask: u32) -> u32 {
    let mut h = Fnv64::default();
    h.write(kind.as_bytes());
    for p in parts {
        h.write(&[0x1f]).write(p.as_bytes());
    }
    (h.finish() as u32) & mask
}

/// Token 1/2/3-grams plus character 3-5-grams of each `<token>`.
pub fn featurize(text: &str, config: &FeaturizerConfig) -> FeatureVector {
    let toks = tokenize(text, config.tokenizer_profile);
    featurize_tokens(&toks, config)
}

pub fn featurize_tokens(toks: &[String], config: &FeaturizerConfig) -> FeatureVector {
    let mask = config.dimensions() - 1;
    let mut out = Vec::new();
    for n in 1..=3 {
        let kind = ["w1", "w2", "w3"][n - 1];
        for w in toks.windows(n) {
            let parts: Vec<&str> = w.iter().map(String::as_str).collect();
            out.push(slot(kind, &parts, mask));
        }
    }
    for t in toks {
        let marked: Vec<char> = std::iter::once('<').chain(t.chars()).chain(std::iter::once('>')).collect();
        for n in 3..=5 {
            let kind = ["c3", "c4", "c5"][n - 3];
            for w in marked.windows(n) {
                let s: String = w.iter().collect();
                out.push(slot(kind, &[&s], mask));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    FeatureVector {
        indices: out,
        dimensions: config.dimensions(),
    }
}
