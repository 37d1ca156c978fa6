//! Per-head logistic training: mini-batch cross-entropy, Adam, linear
//! learning-rate warmup then constant.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::featurize::{featurize, FeaturizerConfig};
use super::model::{sigmoid, Head, MultiHeadModel};
use crate::contrast::ContrastSet;
use crate::error::{Error, Result};
use crate::hash::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_epochs: usize,
    pub rng_seed: u64,
    pub loss: String,
    pub adam: AdamParams,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-5,
            warmup_epochs: 150,
            rng_seed: 0,
            loss: "cross_entropy".to_string(),
            adam: AdamParams::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.warmup_epochs == 0 {
            return Err(Error::InvalidInput("epochs, batch_size and warmup_epochs must be positive".into()));
        }
        if self.warmup_epochs > self.epochs {
            return Err(Error::InvalidInput("warmup_epochs exceeds epochs".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning_rate must be positive".into()));
        }
        if self.loss != "cross_entropy" {
            return Err(Error::InvalidInput(format!("unsupported loss `{}`", self.loss)));
        }
        Ok(())
    }

    /// Learning rate for a 0-based epoch: ramps linearly to the base rate over
    /// the warmup epochs, then stays there.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            self.learning_rate * (epoch + 1) as f64 / self.warmup_epochs as f64
        } else {
            self.learning_rate
        }
    }
}

/// An example over the head's local (dense) parameter indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalExample {
    pub dims: Vec<usize>,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl HeadParams {
    pub fn zeros(dims: usize) -> Self {
        HeadParams {
            weights: vec![0.0; dims],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &LocalExample) -> f64 {
        self.bias + x.dims.iter().map(|&d| self.weights[d]).sum::<f64>()
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean binary cross-entropy of the batch.
pub fn cross_entropy(params: &HeadParams, batch: &[&LocalExample]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|x| {
            let z = params.logit(x);
            softplus(z) - x.label * z
        })
        .sum();
    total / batch.len() as f64
}

/// Analytic gradient of [`cross_entropy`]: (dL/dw, dL/db).
pub fn cross_entropy_gradient(params: &HeadParams, batch: &[&LocalExample]) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; params.weights.len()];
    let mut gb = 0.0;
    if batch.is_empty() {
        return (gw, gb);
    }
    let scale = 1.0 / batch.len() as f64;
    for x in batch {
        let r = (sigmoid(params.logit(x)) - x.label) * scale;
        gb += r;
        for &d in &x.dims {
            gw[d] += r;
        }
    }
    (gw, gb)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    mb: f64,
    vb: f64,
    step: i32,
    params: AdamParams,
}

impl Adam {
    fn new(dims: usize, params: AdamParams) -> Self {
        Adam {
            m: vec![0.0; dims],
            v: vec![0.0; dims],
            mb: 0.0,
            vb: 0.0,
            step: 0,
            params,
        }
    }

    fn update(&mut self, theta: &mut HeadParams, grad: &[f64], grad_bias: f64, lr: f64) {
        let AdamParams { beta1, beta2, epsilon } = self.params;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let apply = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        };
        for (i, g) in grad.iter().enumerate() {
            apply(&mut theta.weights[i], &mut self.m[i], &mut self.v[i], *g);
        }
        apply(&mut theta.bias, &mut self.mb, &mut self.vb, grad_bias);
    }
}

/// Mean training loss after every epoch, per head.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epoch_loss: BTreeMap<String, Vec<f64>>,
}

struct HeadData {
    /// local index -> global hashed dimension, ascending
    dims: Vec<u32>,
    examples: Vec<LocalExample>,
}

fn prepare(set: &ContrastSet, featurizer: &FeaturizerConfig) -> Result<HeadData> {
    let pos = set.positives();
    if pos == 0 || pos == set.len() {
        return Err(Error::SingleClass(format!(
            "contrast set for `{}` needs at least one positive and one negative",
            set.feature_id
        )));
    }
    // canonical order so the result does not depend on entry order
    let mut entries: Vec<_> = set.entries.iter().collect();
    entries.sort_by(|a, b| (&a.text, a.label).cmp(&(&b.text, b.label)));

    let vectors: Vec<_> = entries.iter().map(|e| featurize(&e.text, featurizer)).collect();
    let mut dims: Vec<u32> = vectors.iter().flat_map(|v| v.indices.iter().copied()).collect();
    dims.sort_unstable();
    dims.dedup();
    let local: HashMap<u32, usize> = dims.iter().enumerate().map(|(i, &d)| (d, i)).collect();

    let examples = entries
        .iter()
        .zip(&vectors)
        .map(|(e, v)| LocalExample {
            dims: v.indices.iter().map(|d| local[d]).collect(),
            label: f64::from(e.label),
        })
        .collect();
    Ok(HeadData { dims, examples })
}

fn train_head(feature_id: &str, data: &HeadData, config: &TrainingConfig) -> (Head, Vec<f64>) {
    let mut params = HeadParams::zeros(data.dims.len());
    let mut adam = Adam::new(data.dims.len(), config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.rng_seed, feature_id));
    let mut order: Vec<usize> = (0..data.examples.len()).collect();
    let all: Vec<&LocalExample> = data.examples.iter().collect();
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let mut idx = chunk.to_vec();
            // fixed accumulation order within a batch
            idx.sort_unstable();
            let batch: Vec<&LocalExample> = idx.iter().map(|&i| &data.examples[i]).collect();
            let (gw, gb) = cross_entropy_gradient(&params, &batch);
            adam.update(&mut params, &gw, gb, lr);
        }
        losses.push(cross_entropy(&params, &all));
    }

    let weights = data
        .dims
        .iter()
        .zip(&params.weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(&d, &w)| (d, w))
        .collect();
    (
        Head {
            bias: params.bias,
            weights,
        },
        losses,
    )
}

/// Trains one head per contrast set. Heads train in parallel; each head is
/// sequential and deterministic given `config.rng_seed`.
pub fn train(
    sets: &[ContrastSet],
    featurizer: FeaturizerConfig,
    config: &TrainingConfig,
) -> Result<(MultiHeadModel, TrainingLog)> {
    config.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    for s in sets {
        if !seen.insert(&s.feature_id) {
            return Err(Error::InvalidInput(format!("two contrast sets for feature `{}`", s.feature_id)));
        }
    }
    let prepared: Vec<(String, HeadData)> = sets
        .iter()
        .map(|s| Ok((s.feature_id.clone(), prepare(s, &featurizer)?)))
        .collect::<Result<_>>()?;

    let trained: Vec<(String, Head, Vec<f64>)> = prepared
        .par_iter()
        .map(|(f, data)| {
            let (head, losses) = train_head(f, data, config);
            (f.clone(), head, losses)
        })
        .collect();

    let mut model = MultiHeadModel {
        featurizer,
        training: config.clone(),
        heads: BTreeMap::new(),
    };
    let mut log = TrainingLog::default();
    for (f, head, losses) in trained {
        model.heads.insert(f.clone(), head);
        log.epoch_loss.insert(f, losses);
    }
    Ok((model, log))
}
