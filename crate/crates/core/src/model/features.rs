use crate::detect::P3Moment;
use crate::geometry::{PITCH_LENGTH, PITCH_WIDTH};
use serde::{Deserialize, Serialize};

/// Pre-pass event features. Only information known before the ball is
/// played is representable here; end location and body part have no slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub x: f64,
    pub y: f64,
    pub under_pressure: f64,
}

impl FeatureVector {
    pub const ARITY: usize = 3;

    pub fn as_array(&self) -> [f64; Self::ARITY] {
        [self.x, self.y, self.under_pressure]
    }
}

pub fn extract_features(moment: &P3Moment) -> FeatureVector {
    FeatureVector {
        x: moment.origin.x / PITCH_LENGTH,
        y: moment.origin.y / PITCH_WIDTH,
        under_pressure: if moment.under_pressure { 1.0 } else { 0.0 },
    }
}
