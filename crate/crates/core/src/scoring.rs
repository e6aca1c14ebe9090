//! One scoring path shared by evaluation and the service, so a moment
//! scored offline and rescored online yields the same bits.

use crate::detect::{Label, P3Moment};
use crate::model::{extract_features, predict_baseline, ModelError, SavedModel};
use crate::render::{render_moment, RasterImage, RenderConfig};
use serde::{Deserialize, Serialize};

/// Model input tensor for a rendered moment.
pub fn image_tensor(model: &SavedModel, image: &RasterImage) -> Option<Vec<f64>> {
    match model {
        SavedModel::Cnn(m) => {
            let shape = m.input();
            Some(image.to_tensor(shape.width, shape.height))
        }
        SavedModel::Baseline(_) => None,
    }
}

/// Probability of a penetrative pass. The CNN reads `image`; the baseline
/// reads only the pre-pass event features of `moment`.
pub fn score_with_image(
    model: &SavedModel,
    moment: &P3Moment,
    image: &RasterImage,
) -> Result<f64, ModelError> {
    match model {
        SavedModel::Cnn(m) => {
            let shape = m.input();
            m.forward(&image.to_tensor(shape.width, shape.height))
        }
        SavedModel::Baseline(b) => Ok(predict_baseline(b, &extract_features(moment))),
    }
}

pub fn score_moment(
    model: &SavedModel,
    moment: &P3Moment,
    render: &RenderConfig,
) -> Result<f64, ModelError> {
    match model {
        SavedModel::Baseline(b) => Ok(predict_baseline(b, &extract_features(moment))),
        SavedModel::Cnn(_) => score_with_image(model, moment, &render_moment(moment, render)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSide {
    Train,
    Val,
}

/// Line of `eval/scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub moment_id: String,
    pub match_id: String,
    pub label: Label,
    pub probability: f64,
    pub split: SplitSide,
}
