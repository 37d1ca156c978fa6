//! Per-feature binary scorers: a hashed n-gram featurizer feeding one
//! logistic head per feature, plus import of scores produced elsewhere.

mod featurize;
mod model;
mod scores;
mod train;

pub use featurize::{featurize, featurize_tokens, FeatureVector, FeaturizerConfig, DEFAULT_HASH_BITS};
pub use model::{sigmoid, Head, MultiHeadModel, MODEL_FORMAT, MODEL_VERSION};
pub use scores::{
    export_training_jsonl, import_external_scores, load_training_jsonl, read_score_records, score_corpus,
    write_score_records, Provenance, ScoreMatrix, ScoreRecord, TrainingRecord,
};
pub use train::{
    cross_entropy, cross_entropy_gradient, train, AdamParams, HeadParams, LocalExample, TrainingConfig, TrainingLog,
};
