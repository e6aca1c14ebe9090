//! Classifiers for "will this moment become a penetrative pass".
//!
//! Two routes share one evaluation protocol: a logistic baseline over the
//! three pre-pass event features, and a small CNN over the rendered moment.

pub mod baseline;
pub mod cnn;
pub mod features;
pub mod persist;
pub mod split;

pub use baseline::{predict_baseline, train_baseline, BaselineConfig, BaselineModel};
pub use cnn::{
    build_cnn, gradient_check, train_cnn, Architecture, CnnModel, CnnTrainConfig, InputShape,
    LayerSpec,
};
pub use features::{extract_features, FeatureVector};
pub use persist::{load_model, save_model, SavedModel};
pub use split::{Split, SplitPolicy};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("degenerate labels: training data needs both classes")]
    DegenerateLabels,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("input has {found} values, model expects {expected}")]
    InputSize { expected: usize, found: usize },
    #[error("non-finite loss {loss} at epoch {epoch} (learning rate {lr} too high?)")]
    NonFiniteLoss { epoch: usize, loss: f64, lr: f64 },
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("corrupted length: expected {expected} values, found {found}")]
    CorruptedLength { expected: usize, found: usize },
    #[error("bad model header: {0}")]
    Header(String),
    #[error("split leaks match {0} into both train and validation")]
    SplitLeak(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Binary cross-entropy of a logit, computed without forming the
/// probability.
pub fn bce_with_logit(z: f64, label: bool) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub(crate) fn check_labels(labels: impl Iterator<Item = bool>) -> Result<(), ModelError> {
    let (mut pos, mut neg) = (false, false);
    let mut any = false;
    for l in labels {
        any = true;
        pos |= l;
        neg |= !l;
    }
    if !any {
        return Err(ModelError::EmptyDataset);
    }
    if pos && neg {
        Ok(())
    } else {
        Err(ModelError::DegenerateLabels)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub epochs: usize,
    pub wall_clock_ms: u64,
    pub train_auc: Option<f64>,
    pub val_auc: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_bce() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) < 1.0);
        assert!(sigmoid(-800.0) > 0.0);
        assert!((bce_with_logit(0.0, true) - std::f64::consts::LN_2).abs() < 1e-15);
        let z: f64 = 1.7;
        let p = 1.0 / (1.0 + (-z).exp());
        assert!((bce_with_logit(z, false) - -(1.0 - p).ln()).abs() < 1e-12);
        assert!(bce_with_logit(1e6, true).is_finite());
    }
}
