//! Position edits on a copy of a stored moment, followed by detection,
//! rendering and scoring exactly as the offline pipeline does them.

use p3_core::detect::{detect_p3, DetectConfig, P3Moment};
use p3_core::geometry::{Point, Polygon, PITCH_LENGTH, PITCH_WIDTH};
use p3_core::model::SavedModel;
use p3_core::render::{encode_png, render_moment, RenderConfig};
use p3_core::scoring::score_with_image;
use p3_core::store::sha256_hex;
use serde::{Deserialize, Serialize};

pub const MAX_EDITS: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edit {
    /// Index into the moment's `all_players`.
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub edits: Vec<Edit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResult {
    pub request_id: String,
    pub moment_id: String,
    pub still_p3: bool,
    pub rejection_reason: Option<String>,
    pub probability: Option<f64>,
    pub original_probability: Option<f64>,
    pub hull: Option<Polygon>,
    pub image: Option<String>,
}

impl WhatIfRequest {
    pub fn validate(&self, moment: &P3Moment) -> Result<(), String> {
        if self.edits.len() > MAX_EDITS {
            return Err(format!(
                "at most {MAX_EDITS} edits, got {}",
                self.edits.len()
            ));
        }
        for e in &self.edits {
            if e.index >= moment.all_players.len() {
                return Err(format!(
                    "player index {} out of range (frame has {} players)",
                    e.index,
                    moment.all_players.len()
                ));
            }
            let in_x = e.x.is_finite() && (0.0..=PITCH_LENGTH).contains(&e.x);
            let in_y = e.y.is_finite() && (0.0..=PITCH_WIDTH).contains(&e.y);
            if !in_x || !in_y {
                return Err(format!("({}, {}) is outside the pitch", e.x, e.y));
            }
        }
        Ok(())
    }

    /// Stable id of (moment, edits), used as the cache key.
    pub fn request_id(&self, moment_id: &str) -> String {
        let body = serde_json::to_vec(&self.edits).expect("edits serialize");
        let mut key = moment_id.as_bytes().to_vec();
        key.push(0x1f);
        key.extend_from_slice(&body);
        sha256_hex(&key)[..32].to_string()
    }
}

/// Output of one evaluation: the result plus the rendered PNG when the
/// edited frame is still a P3 moment.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub result: WhatIfResult,
    pub png: Option<Vec<u8>>,
}

/// Apply validated edits. Moving the passer moves the pass origin by the
/// same offset.
pub fn evaluate(
    moment: &P3Moment,
    request: &WhatIfRequest,
    original_probability: Option<f64>,
    detect: &DetectConfig,
    render: &RenderConfig,
    model: &SavedModel,
) -> Result<Evaluated, p3_core::model::ModelError> {
    let request_id = request.request_id(&moment.moment_id);
    let mut snapshot = moment.to_snapshot();
    for e in &request.edits {
        let p = &mut snapshot.frame.players[e.index];
        let to = Point::new(e.x, e.y);
        if p.actor {
            if let Some(origin) = snapshot.event.location.as_mut() {
                let moved = Point::new(
                    origin.x + to.x - p.location.x,
                    origin.y + to.y - p.location.y,
                );
                *origin = moved.clamp_to_pitch().0;
            }
        }
        p.location = to;
    }
    let mut result = WhatIfResult {
        image: None,
        moment_id: moment.moment_id.clone(),
        still_p3: false,
        rejection_reason: None,
        probability: None,
        original_probability,
        hull: None,
        request_id,
    };
    match detect_p3(&snapshot, detect) {
        Err(reason) => {
            result.rejection_reason = Some(reason.to_string());
            Ok(Evaluated { result, png: None })
        }
        Ok(edited) => {
            let image = render_moment(&edited, render);
            let p = score_with_image(model, &edited, &image)?;
            result.still_p3 = true;
            result.probability = Some(p);
            result.hull = Some(edited.hull.clone());
            result.image = Some(format!("/api/v1/whatif/{}/image.png", result.request_id));
            Ok(Evaluated {
                png: Some(encode_png(&image)),
                result,
            })
        }
    }
}
