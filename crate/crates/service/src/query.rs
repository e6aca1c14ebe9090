//! `GET /moments` query string: filters plus offset/limit paging.

use p3_core::detect::Label;
use std::collections::HashMap;

pub const MAX_LIMIT: usize = 200;
pub const DEFAULT_LIMIT: usize = 50;

const KEYS: [&str; 12] = [
    "team",
    "player",
    "match",
    "label",
    "min_probability",
    "max_probability",
    "min_x",
    "max_x",
    "under_pressure",
    "offset",
    "limit",
    "sort",
];

/// Why a query was refused. `Malformed` maps to 400, `Invalid` to 422.
#[derive(Debug, PartialEq)]
pub enum QueryError {
    Malformed(String),
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentQuery {
    pub team: Option<String>,
    pub player: Option<String>,
    pub match_id: Option<String>,
    pub label: Option<Label>,
    pub probability: (f64, f64),
    pub zone: (f64, f64),
    pub under_pressure: Option<bool>,
    pub offset: usize,
    pub limit: usize,
}

impl Default for MomentQuery {
    fn default() -> Self {
        Self {
            team: None,
            player: None,
            match_id: None,
            label: None,
            probability: (0.0, 1.0),
            zone: (0.0, 120.0),
            under_pressure: None,
            offset: 0,
            limit: DEFAULT_LIMIT,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, QueryError> {
    v.parse()
        .map_err(|_| QueryError::Malformed(format!("{key}: cannot parse {v:?}")))
}

fn finite(key: &str, v: &str) -> Result<f64, QueryError> {
    let x: f64 = number(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(QueryError::Malformed(format!("{key}: not a finite number")))
    }
}

impl MomentQuery {
    pub fn parse(params: &HashMap<String, String>) -> Result<Self, QueryError> {
        let mut unknown: Vec<&str> = params
            .keys()
            .map(String::as_str)
            .filter(|k| !KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            unknown.sort_unstable();
            return Err(QueryError::Malformed(format!(
                "unknown filter {}",
                unknown.join(", ")
            )));
        }
        let get = |k: &str| params.get(k).map(String::as_str);
        let mut q = MomentQuery {
            team: get("team").map(str::to_string),
            player: get("player").map(str::to_string),
            match_id: get("match").map(str::to_string),
            ..Default::default()
        };
        if let Some(l) = get("label") {
            q.label = Some(match l {
                "penetrative" => Label::Penetrative,
                "non_penetrative" => Label::NonPenetrative,
                _ => return Err(QueryError::Malformed(format!("label: unknown value {l:?}"))),
            });
        }
        if let Some(v) = get("under_pressure") {
            q.under_pressure = Some(match v {
                "true" | "1" => true,
                "false" | "0" => false,
                _ => return Err(QueryError::Malformed(format!("under_pressure: {v:?}"))),
            });
        }
        if let Some(v) = get("min_probability") {
            q.probability.0 = finite("min_probability", v)?;
        }
        if let Some(v) = get("max_probability") {
            q.probability.1 = finite("max_probability", v)?;
        }
        if let Some(v) = get("min_x") {
            q.zone.0 = finite("min_x", v)?;
        }
        if let Some(v) = get("max_x") {
            q.zone.1 = finite("max_x", v)?;
        }
        if let Some(v) = get("offset") {
            q.offset = number("offset", v)?;
        }
        if let Some(v) = get("limit") {
            q.limit = number("limit", v)?;
        }
        if let Some(v) = get("sort") {
            if v != "probability" {
                return Err(QueryError::Malformed(format!("sort: unsupported {v:?}")));
            }
        }

        let (lo, hi) = q.probability;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(QueryError::Invalid(format!(
                "probability range [{lo}, {hi}] must be ordered within [0, 1]"
            )));
        }
        let (lo, hi) = q.zone;
        if lo > hi || lo < 0.0 || hi > 120.0 {
            return Err(QueryError::Invalid(format!(
                "zone range [{lo}, {hi}] must be ordered within [0, 120]"
            )));
        }
        if q.limit == 0 || q.limit > MAX_LIMIT {
            return Err(QueryError::Invalid(format!(
                "limit must be between 1 and {MAX_LIMIT}"
            )));
        }
        Ok(q)
    }

    /// Probability filters only apply when set away from the full range;
    /// unscored moments pass an unrestricted query.
    pub fn probability_filtered(&self) -> bool {
        self.probability != (0.0, 1.0)
    }
}
