//! Logistic regression over the event features, fit by full-batch
//! gradient descent.

use super::features::FeatureVector;
use super::{bce_with_logit, check_labels, sigmoid, ModelError, TrainReport};
use crate::metrics::roc_curve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub weights: [f64; FeatureVector::ARITY],
    pub bias: f64,
    pub trained: bool,
    pub seed: u64,
}

impl BaselineModel {
    pub fn new(weights: [f64; FeatureVector::ARITY], bias: f64) -> Self {
        Self {
            weights,
            bias,
            trained: true,
            seed: 0,
        }
    }

    fn logit(&self, f: &FeatureVector) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(f.as_array())
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            epochs: 500,
            seed: 7,
        }
    }
}

pub fn predict_baseline(model: &BaselineModel, f: &FeatureVector) -> f64 {
    sigmoid(model.logit(f))
}

fn mean_loss(model: &BaselineModel, data: &[(FeatureVector, bool)]) -> f64 {
    data.iter()
        .map(|(f, y)| bce_with_logit(model.logit(f), *y))
        .sum::<f64>()
        / data.len().max(1) as f64
}

fn auc_of(model: &BaselineModel, data: &[(FeatureVector, bool)]) -> Option<f64> {
    let scores: Vec<f64> = data
        .iter()
        .map(|(f, _)| predict_baseline(model, f))
        .collect();
    let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
    roc_curve(&scores, &labels).ok().map(|c| c.auc)
}

pub fn train_baseline(
    train: &[(FeatureVector, bool)],
    val: &[(FeatureVector, bool)],
    cfg: &BaselineConfig,
) -> Result<(BaselineModel, TrainReport), ModelError> {
    check_labels(train.iter().map(|s| s.1))?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = BaselineModel {
        weights: std::array::from_fn(|_| rng.gen_range(-0.01..0.01)),
        bias: 0.0,
        trained: false,
        seed: cfg.seed,
    };
    let mut report = TrainReport::default();
    let n = train.len() as f64;
    for epoch in 0..cfg.epochs {
        let mut gw = [0.0; FeatureVector::ARITY];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (f, y) in train {
            let z = model.logit(f);
            loss += bce_with_logit(z, *y);
            let d = sigmoid(z) - if *y { 1.0 } else { 0.0 };
            for (g, x) in gw.iter_mut().zip(f.as_array()) {
                *g += d * x;
            }
            gb += d;
        }
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                epoch,
                loss,
                lr: cfg.lr,
            });
        }
        report.train_loss.push(loss / n);
        for (w, g) in model.weights.iter_mut().zip(gw) {
            *w -= cfg.lr * g / n;
        }
        model.bias -= cfg.lr * gb / n;
        if !val.is_empty() {
            report.val_loss.push(mean_loss(&model, val));
        }
        report.epochs = epoch + 1;
    }
    // stored as f32 on disk
    for w in &mut model.weights {
        *w = *w as f32 as f64;
    }
    model.bias = model.bias as f32 as f64;
    model.trained = true;
    report.train_auc = auc_of(&model, train);
    if !val.is_empty() {
        report.val_auc = auc_of(&model, val);
    }
    report.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok((model, report))
}
