//! Corpus-guided contrast-set generation for morphosyntactic feature detection.
//!
//! The pipeline runs from an unlabeled target corpus and a handful of seed
//! positives per feature through candidate generation ([`edit`]), human
//! filtering ([`annotation`]), baseline training sets ([`baselines`]),
//! per-feature scoring ([`classifier`]), ranking evaluation ([`eval`]) and
//! per-speaker frequency analysis ([`quantify`]).

pub mod annotation;
pub mod baselines;
pub mod classifier;
pub mod cli;
pub mod contrast;
pub mod corpus;
pub mod edit;
pub mod error;
pub mod eval;
mod hash;
pub mod jsonl;
pub mod manifest;
pub mod quantify;

pub use error::{Error, Result};
