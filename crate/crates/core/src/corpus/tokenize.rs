use serde::{Deserialize, Serialize};

/// Per-corpus tokenizer settings. Punctuation splitting is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizerProfile {
    pub case_folding: bool,
}

impl TokenizerProfile {
    pub const CASED: TokenizerProfile = TokenizerProfile { case_folding: false };
    pub const UNCASED: TokenizerProfile = TokenizerProfile { case_folding: true };
}

impl Default for TokenizerProfile {
    fn default() -> Self {
        Self::CASED
    }
}

fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Splits on whitespace, then peels punctuation off both ends of every chunk
/// one character at a time. Anything word-internal (apostrophes, hyphens,
/// decimal points) stays attached.
pub fn tokenize(text: &str, profile: TokenizerProfile) -> Vec<String> {
    let folded;
    let text = if profile.case_folding {
        folded = text.to_lowercase();
        folded.as_str()
    } else {
        text
    };

    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let Some(first_alnum) = chunk.find(|c: char| !is_edge_punct(c)) else {
            out.extend(chunk.chars().map(String::from));
            continue;
        };
        let last = chunk.char_indices().rev().find(|&(_, c)| !is_edge_punct(c)).unwrap();
        let end = last.0 + last.1.len_utf8();

        out.extend(chunk[..first_alnum].chars().map(String::from));
        out.push(chunk[first_alnum..end].to_string());
        out.extend(chunk[end..].chars().map(String::from));
    }
    out
}
