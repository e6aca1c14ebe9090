//! Potential penetrative pass detection.
//!
//! A pass qualifies when it is played with the foot from inside the zone,
//! the non-goalkeeper opponents ahead of the ball span a proper convex hull,
//! and at least one teammate stands inside that hull. A qualifying moment is
//! labelled penetrative when the pass was completed and ended inside the
//! hull as it stood at the moment of the pass.

use crate::geometry::{
    convex_hull, point_in_polygon, Location, Point, Polygon, Zone, PITCH_LENGTH,
};
use crate::ingest::{
    AttackDirection, BodyPart, Event, EventKind, Frame360, FramePlayer, PassDetail, PassOutcome,
    PassSnapshot,
};
use crate::store::{self, StoreError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub min_opponents_for_hull: usize,
    pub boundary_counts_inside: bool,
    pub zone: Zone,
    pub exclude_set_pieces: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            min_opponents_for_hull: 3,
            boundary_counts_inside: true,
            zone: Zone::default(),
            exclude_set_pieces: true,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid zone [{lo}, {hi}]: need 0 <= lo < hi <= 120")]
pub struct InvalidZone {
    pub lo: f64,
    pub hi: f64,
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), InvalidZone> {
        let Zone { lo, hi } = self.zone;
        if 0.0 <= lo && lo < hi && hi <= PITCH_LENGTH {
            Ok(())
        } else {
            Err(InvalidZone { lo, hi })
        }
    }
}

/// First rule a pass failed, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    BodyPart,
    SetPiece,
    OutsideZone,
    InsufficientOpponents,
    DegenerateHull,
    NoReceiverInsideHull,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::BodyPart => "body part",
            Rejection::SetPiece => "set piece",
            Rejection::OutsideZone => "outside zone",
            Rejection::InsufficientOpponents => "insufficient opponents",
            Rejection::DegenerateHull => "degenerate hull",
            Rejection::NoReceiverInsideHull => "no receiver inside hull",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Penetrative,
    NonPenetrative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Penetrative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBasis {
    pub outcome: PassOutcome,
    pub end_location: Option<Point>,
    pub end_in_hull: bool,
}

impl LabelBasis {
    pub fn label(&self) -> Label {
        if self.outcome == PassOutcome::Complete && self.end_in_hull {
            Label::Penetrative
        } else {
            Label::NonPenetrative
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P3Moment {
    pub moment_id: String,
    pub match_id: String,
    pub event_id: String,
    pub team_id: String,
    pub player_id: String,
    pub period: u32,
    pub minute: u32,
    pub second: u32,
    pub origin: Point,
    pub under_pressure: bool,
    pub body_part: BodyPart,
    pub set_piece: bool,
    pub hull: Polygon,
    pub opponents_in_hull_count: usize,
    pub receivers_inside: Vec<Point>,
    pub visible_area: Option<Polygon>,
    pub all_players: Vec<FramePlayer>,
    pub label: Label,
    pub label_basis: LabelBasis,
}

impl P3Moment {
    /// Rebuild the pass snapshot the moment was detected from (minus the
    /// fields detection does not look at).
    pub fn to_snapshot(&self) -> PassSnapshot {
        PassSnapshot {
            event: Event {
                event_id: self.event_id.clone(),
                match_id: self.match_id.clone(),
                period: self.period,
                minute: self.minute,
                second: self.second,
                team_id: self.team_id.clone(),
                player_id: Some(self.player_id.clone()),
                event_kind: EventKind::Pass,
                location: Some(self.origin),
                under_pressure: self.under_pressure,
                pass_detail: Some(PassDetail {
                    body_part: self.body_part,
                    end_location: self.label_basis.end_location,
                    outcome: self.label_basis.outcome,
                    set_piece: self.set_piece,
                }),
                replacement_id: None,
            },
            frame: Frame360 {
                event_id: self.event_id.clone(),
                visible_area: self.visible_area.clone(),
                players: self.all_players.clone(),
            },
            attack_sign: AttackDirection::PositiveX,
        }
    }

    /// Index of the passer in `all_players`, if the frame flags one.
    pub fn passer_index(&self) -> Option<usize> {
        self.all_players.iter().position(|p| p.actor)
    }
}

pub fn moment_id(match_id: &str, event_id: &str) -> String {
    let mut key = Vec::with_capacity(match_id.len() + event_id.len() + 1);
    key.extend_from_slice(match_id.as_bytes());
    key.push(0x1f);
    key.extend_from_slice(event_id.as_bytes());
    store::sha256_hex(&key)[..16].to_string()
}

fn is_inside(loc: Location, boundary_counts: bool) -> bool {
    match loc {
        Location::Inside => true,
        Location::Boundary => boundary_counts,
        Location::Outside => false,
    }
}

/// Label a qualifying pass from its outcome and end point. The hull end
/// test always includes the boundary.
pub fn label_penetrative(hull: &Polygon, pass: &PassDetail) -> (Label, LabelBasis) {
    let end_in_hull = pass
        .end_location
        .is_some_and(|end| point_in_polygon(end, hull) != Location::Outside);
    let basis = LabelBasis {
        outcome: pass.outcome,
        end_location: pass.end_location,
        end_in_hull,
    };
    (basis.label(), basis)
}

/// Opponents that build the hull: strictly ahead of the ball, keeper excluded.
pub fn hull_opponents(frame: &Frame360, origin: Point) -> Vec<Point> {
    frame
        .players
        .iter()
        .filter(|p| !p.teammate && !p.keeper && p.location.x > origin.x)
        .map(|p| p.location)
        .collect()
}

pub fn detect_p3(snapshot: &PassSnapshot, cfg: &DetectConfig) -> Result<P3Moment, Rejection> {
    let event = &snapshot.event;
    let pass = event.pass_detail.as_ref().ok_or(Rejection::BodyPart)?;
    if !pass.body_part.is_foot() {
        return Err(Rejection::BodyPart);
    }
    if cfg.exclude_set_pieces && pass.set_piece {
        return Err(Rejection::SetPiece);
    }
    let origin = snapshot.origin();
    if !cfg.zone.contains(origin.x) {
        return Err(Rejection::OutsideZone);
    }
    let ahead = hull_opponents(&snapshot.frame, origin);
    if ahead.len() < cfg.min_opponents_for_hull.max(3) {
        return Err(Rejection::InsufficientOpponents);
    }
    let hull = convex_hull(&ahead).ok_or(Rejection::DegenerateHull)?;
    let receivers_inside: Vec<Point> = snapshot
        .frame
        .players
        .iter()
        .filter(|p| p.teammate && !p.actor)
        .filter(|p| {
            is_inside(
                point_in_polygon(p.location, &hull),
                cfg.boundary_counts_inside,
            )
        })
        .map(|p| p.location)
        .collect();
    if receivers_inside.is_empty() {
        return Err(Rejection::NoReceiverInsideHull);
    }
    let opponents_in_hull_count = snapshot
        .frame
        .opponents()
        .filter(|p| hull.contains(p.location))
        .count();
    let (label, label_basis) = label_penetrative(&hull, pass);
    Ok(P3Moment {
        moment_id: moment_id(&event.match_id, &event.event_id),
        match_id: event.match_id.clone(),
        event_id: event.event_id.clone(),
        team_id: event.team_id.clone(),
        player_id: event.player_id.clone().unwrap_or_default(),
        period: event.period,
        minute: event.minute,
        second: event.second,
        origin,
        under_pressure: event.under_pressure,
        body_part: pass.body_part,
        set_piece: pass.set_piece,
        hull,
        opponents_in_hull_count,
        receivers_inside,
        visible_area: snapshot.frame.visible_area.clone(),
        all_players: snapshot.frame.players.clone(),
        label,
        label_basis,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub snapshots: usize,
    pub moments: usize,
    pub positives: usize,
    pub positive_share: f64,
    /// Rejection counts keyed by reason.
    pub rejections: BTreeMap<String, usize>,
}

impl DetectReport {
    fn record(&mut self, outcome: &Result<P3Moment, Rejection>) {
        self.snapshots += 1;
        match outcome {
            Ok(m) => {
                self.moments += 1;
                if m.label.is_positive() {
                    self.positives += 1;
                }
            }
            Err(r) => *self.rejections.entry(r.to_string()).or_default() += 1,
        }
    }

    fn finish(&mut self) {
        self.positive_share = if self.moments == 0 {
            0.0
        } else {
            self.positives as f64 / self.moments as f64
        };
    }
}

/// Detect over in-memory snapshots, preserving their order.
pub fn detect_all(snapshots: &[PassSnapshot], cfg: &DetectConfig) -> (Vec<P3Moment>, DetectReport) {
    let mut report = DetectReport::default();
    let mut moments = Vec::new();
    for s in snapshots {
        let r = detect_p3(s, cfg);
        report.record(&r);
        if let Ok(m) = r {
            moments.push(m);
        }
    }
    report.finish();
    (moments, report)
}

/// Run detection over every match in an ingest store, in match order.
pub fn scan_corpus(
    store_dir: &Path,
    cfg: &DetectConfig,
) -> Result<(Vec<P3Moment>, DetectReport), StoreError> {
    let manifest = store::read_manifest(store_dir)?;
    let mut snapshots = Vec::new();
    for match_id in manifest.matches.keys() {
        snapshots.extend(store::read_snapshots(store_dir, match_id)?);
    }
    Ok(detect_all(&snapshots, cfg))
}

pub fn moments_path(store_dir: &Path) -> std::path::PathBuf {
    store_dir.join("moments.jsonl")
}

pub fn report_path(store_dir: &Path) -> std::path::PathBuf {
    store_dir.join("detect_report.json")
}

pub fn read_moments(store_dir: &Path) -> Result<Vec<P3Moment>, StoreError> {
    store::read_jsonl(&moments_path(store_dir))
}
