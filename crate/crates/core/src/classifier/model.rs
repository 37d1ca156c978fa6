use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::featurize::{featurize, FeatureVector, FeaturizerConfig};
use super::train::TrainingConfig;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "cgedit-model";
pub const MODEL_VERSION: u32 = 1;

/// One binary scorer. Weights are sparse, sorted by dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub bias: f64,
    pub weights: Vec<(u32, f64)>,
}

impl Head {
    pub fn weight(&self, dim: u32) -> f64 {
        self.weights
            .binary_search_by_key(&dim, |&(d, _)| d)
            .map_or(0.0, |i| self.weights[i].1)
    }

    pub fn logit(&self, x: &FeatureVector) -> f64 {
        self.bias + x.indices.iter().map(|&d| self.weight(d)).sum::<f64>()
    }

    pub fn probability(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.logit(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHeadModel {
    pub featurizer: FeaturizerConfig,
    pub training: TrainingConfig,
    pub heads: BTreeMap<String, Head>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    featurizer: FeaturizerConfig,
    training: TrainingConfig,
}

#[derive(Serialize, Deserialize)]
struct HeadRecord {
    feature_id: String,
    bias: f64,
    weights: Vec<(u32, f64)>,
}

impl MultiHeadModel {
    /// A model whose heads are all zero (every score is 0.5).
    pub fn zeroed(feature_ids: &[&str], featurizer: FeaturizerConfig, training: TrainingConfig) -> Self {
        MultiHeadModel {
            featurizer,
            training,
            heads: feature_ids.iter().map(|f| (f.to_string(), Head::default())).collect(),
        }
    }

    pub fn head(&self, feature_id: &str) -> Result<&Head> {
        self.heads
            .get(feature_id)
            .ok_or_else(|| Error::UnknownFeature(feature_id.to_string()))
    }

    pub fn score(&self, feature_id: &str, text: &str) -> Result<f64> {
        let head = self.head(feature_id)?;
        Ok(head.probability(&featurize(text, &self.featurizer)))
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = &str> {
        self.heads.keys().map(String::as_str)
    }

    pub fn to_jsonl(&self) -> String {
        let header = ModelHeader {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            featurizer: self.featurizer,
            training: self.training.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (feature_id, head) in &self.heads {
            let rec = HeadRecord {
                feature_id: feature_id.clone(),
                bias: head.bias,
                weights: head.weights.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("head serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let Some((_, first)) = lines.next() else {
            return Err(Error::parse(path, 1, "empty model file"));
        };
        let first = first.map_err(|e| Error::io(path, e))?;
        let header: ModelHeader = serde_json::from_str(&first).map_err(|e| Error::parse(path, 1, e.to_string()))?;
        if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported model format {} v{}", header.format, header.version),
            ));
        }
        let mut heads = BTreeMap::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: HeadRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            if !rec.weights.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(Error::parse(path, i + 1, "head weights must be sorted by dimension"));
            }
            heads.insert(
                rec.feature_id,
                Head {
                    bias: rec.bias,
                    weights: rec.weights,
                },
            );
        }
        Ok(MultiHeadModel {
            featurizer: header.featurizer,
            training: header.training,
            heads,
        })
    }
}
