use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate utterance id `{0}`")]
    DuplicateUtterance(String),

    #[error("duplicate feature id `{0}`")]
    DuplicateFeature(String),

    #[error("unknown seed id `{0}`")]
    UnknownSeed(String),

    #[error("unknown feature id `{0}`")]
    UnknownFeature(String),

    #[error("unknown utterance id `{0}`")]
    UnknownUtterance(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("conflicting labels for text `{0}`")]
    LabelConflict(String),

    #[error("contrast sets have different features: `{0}` vs `{1}`")]
    FeatureMismatch(String, String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("candidate `{got}` is not the one currently served (expected {expected})")]
    NotServed { got: String, expected: String },

    #[error("seed `{seed_id}` already has its {decision} quota")]
    QuotaMet { seed_id: String, decision: String },

    #[error("nothing to undo")]
    NothingToUndo,

    #[error("session has unfinished seeds: {}", .0.join(", "))]
    UnfinishedSeeds(Vec<String>),

    #[error("score {score} for ({utterance_id}, {feature_id}) is outside [0, 1]")]
    ScoreRange {
        utterance_id: String,
        feature_id: String,
        score: f64,
    },

    #[error("score matrix is missing {} cell(s): {}", .0.len(), .0.iter().take(10).map(|(u, f)| format!("({u}, {f})")).collect::<Vec<_>>().join(", "))]
    MissingScores(Vec<(String, String)>),

    #[error("metric reports do not match: {0}")]
    ReportMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
