//! StatsBomb open-data readers (events, 360 freeze frames, lineups) and the
//! pass ↔ freeze-frame join.
//!
//! Parsing is two-phase: the document must be a JSON array (otherwise the
//! whole file fails with a byte offset), then each element is converted on
//! its own so one bad record is skipped and reported rather than fatal.
//!
//! All coordinates are clamped into the 120 × 80 pitch. StatsBomb already
//! orients every event so the acting team attacks toward increasing x, so
//! no mirroring happens here.

use crate::geometry::{Point, Polygon};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("expected a top-level JSON array")]
    NotAnArray,
    #[error("roster incomplete: {0}")]
    RosterIncomplete(String),
}

/// One element that could not be converted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    pub index: usize,
    pub message: String,
}

/// Records parsed from one file plus what was skipped or repaired on the way.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: Vec<RecordError>,
    /// Coordinates moved back inside the pitch.
    pub clamped: usize,
    /// Records kept after a repair (duplicate actor flags and the like).
    pub warnings: usize,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            skipped: Vec::new(),
            clamped: 0,
            warnings: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Pass,
    Substitution,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    RightFoot,
    LeftFoot,
    Head,
    Other,
}

impl BodyPart {
    pub fn is_foot(self) -> bool {
        matches!(self, BodyPart::RightFoot | BodyPart::LeftFoot)
    }

    fn from_statsbomb(name: &str) -> Self {
        match name {
            "Right Foot" => BodyPart::RightFoot,
            "Left Foot" => BodyPart::LeftFoot,
            "Head" => BodyPart::Head,
            _ => BodyPart::Other,
        }
    }

    fn to_statsbomb(self) -> Value {
        let (id, name) = match self {
            BodyPart::RightFoot => (40, "Right Foot"),
            BodyPart::LeftFoot => (38, "Left Foot"),
            BodyPart::Head => (37, "Head"),
            BodyPart::Other => (70, "Other"),
        };
        json!({ "id": id, "name": name })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassOutcome {
    Complete,
    Incomplete,
    Out,
    Offside,
    Unknown,
}

impl PassOutcome {
    fn from_statsbomb(name: Option<&str>) -> Self {
        match name {
            None => PassOutcome::Complete,
            Some("Incomplete") => PassOutcome::Incomplete,
            Some("Out") => PassOutcome::Out,
            Some("Pass Offside") => PassOutcome::Offside,
            Some(_) => PassOutcome::Unknown,
        }
    }

    fn to_statsbomb(self) -> Option<Value> {
        let (id, name) = match self {
            PassOutcome::Complete => return None,
            PassOutcome::Incomplete => (9, "Incomplete"),
            PassOutcome::Out => (75, "Out"),
            PassOutcome::Offside => (76, "Pass Offside"),
            PassOutcome::Unknown => (77, "Unknown"),
        };
        Some(json!({ "id": id, "name": name }))
    }
}

const SET_PIECE_TYPES: [&str; 5] = ["Corner", "Free Kick", "Goal Kick", "Kick Off", "Throw-in"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassDetail {
    pub body_part: BodyPart,
    pub end_location: Option<Point>,
    pub outcome: PassOutcome,
    pub set_piece: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub match_id: String,
    pub period: u32,
    pub minute: u32,
    pub second: u32,
    pub team_id: String,
    pub player_id: Option<String>,
    pub event_kind: EventKind,
    pub location: Option<Point>,
    pub under_pressure: bool,
    pub pass_detail: Option<PassDetail>,
    /// Player coming on, for substitution events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlayer {
    pub location: Point,
    pub teammate: bool,
    pub actor: bool,
    pub keeper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame360 {
    pub event_id: String,
    pub visible_area: Option<Polygon>,
    pub players: Vec<FramePlayer>,
}

impl Frame360 {
    pub fn opponents(&self) -> impl Iterator<Item = &FramePlayer> {
        self.players.iter().filter(|p| !p.teammate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackDirection {
    PositiveX,
}

/// A pass joined with its freeze frame, oriented so the passing team
/// attacks toward increasing x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassSnapshot {
    pub event: Event,
    pub frame: Frame360,
    pub attack_sign: AttackDirection,
}

impl PassSnapshot {
    pub fn pass(&self) -> &PassDetail {
        self.event
            .pass_detail
            .as_ref()
            .expect("snapshot events are passes")
    }

    pub fn origin(&self) -> Point {
        self.event.location.expect("passes always carry a location")
    }

    /// Clamp every coordinate into the pitch. Idempotent.
    pub fn normalized(&self) -> PassSnapshot {
        let mut s = self.clone();
        s.event.location = s.event.location.map(|p| p.clamp_to_pitch().0);
        if let Some(d) = s.event.pass_detail.as_mut() {
            d.end_location = d.end_location.map(|p| p.clamp_to_pitch().0);
        }
        for p in &mut s.frame.players {
            p.location = p.location.clamp_to_pitch().0;
        }
        s.attack_sign = AttackDirection::PositiveX;
        s
    }
}

// ---------------------------------------------------------------------------
// raw schema

fn opaque_id<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Ok(match Option::<Value>::deserialize(d)? {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(Value::Number(n)) => Some(n.to_string()),
        Some(other) => {
            return Err(serde::de::Error::custom(format!(
                "expected string or number id, got {other}"
            )))
        }
    })
}

#[derive(Deserialize)]
struct Named {
    #[serde(default, deserialize_with = "opaque_id")]
    id: Option<String>,
    #[serde(default)]
    name: Option<String>,
}

#[derive(Deserialize)]
struct RawPass {
    #[serde(default)]
    end_location: Option<Vec<f64>>,
    #[serde(default)]
    body_part: Option<Named>,
    #[serde(default)]
    outcome: Option<Named>,
    #[serde(default, rename = "type")]
    pass_type: Option<Named>,
}

#[derive(Deserialize)]
struct RawSubstitution {
    replacement: Named,
}

#[derive(Deserialize)]
struct RawEvent {
    #[serde(deserialize_with = "opaque_id")]
    id: Option<String>,
    #[serde(default)]
    period: Option<u32>,
    #[serde(default)]
    minute: Option<u32>,
    #[serde(default)]
    second: Option<u32>,
    #[serde(rename = "type")]
    kind: Named,
    #[serde(default)]
    team: Option<Named>,
    #[serde(default)]
    player: Option<Named>,
    #[serde(default)]
    location: Option<Vec<f64>>,
    #[serde(default)]
    under_pressure: Option<bool>,
    #[serde(default)]
    pass: Option<RawPass>,
    #[serde(default)]
    substitution: Option<RawSubstitution>,
}

#[derive(Deserialize)]
struct RawFramePlayer {
    #[serde(default)]
    teammate: bool,
    #[serde(default)]
    actor: bool,
    #[serde(default)]
    keeper: bool,
    location: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFrame {
    #[serde(deserialize_with = "opaque_id")]
    event_uuid: Option<String>,
    #[serde(default)]
    visible_area: Option<Vec<f64>>,
    freeze_frame: Vec<RawFramePlayer>,
}

#[derive(Deserialize)]
struct RawPosition {
    #[serde(default)]
    position: Option<String>,
    #[serde(default)]
    start_reason: Option<String>,
}

#[derive(Deserialize)]
struct RawLineupPlayer {
    #[serde(deserialize_with = "opaque_id")]
    player_id: Option<String>,
    #[serde(default)]
    player_name: Option<String>,
    #[serde(default)]
    birth_date: Option<String>,
    #[serde(default)]
    positions: Vec<RawPosition>,
}

#[derive(Deserialize)]
struct RawTeam {
    #[serde(deserialize_with = "opaque_id")]
    team_id: Option<String>,
    #[serde(default)]
    team_name: Option<String>,
    #[serde(default)]
    lineup: Vec<RawLineupPlayer>,
}

fn byte_offset(raw: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in raw.split(|b| *b == b'\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len() + 1;
    }
    raw.len()
}

fn parse_array(raw: &[u8]) -> Result<Vec<Value>, IngestError> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| IngestError::Json {
        offset: byte_offset(raw, e.line(), e.column()),
        message: e.to_string(),
    })?;
    match doc {
        Value::Array(items) => Ok(items),
        _ => Err(IngestError::NotAnArray),
    }
}

fn point_of(v: &[f64], clamped: &mut usize) -> Result<Point, String> {
    match v {
        [x, y, ..] if x.is_finite() && y.is_finite() => {
            let (p, moved) = Point::new(*x, *y).clamp_to_pitch();
            if moved {
                *clamped += 1;
            }
            Ok(p)
        }
        _ => Err(format!("bad location {v:?}")),
    }
}

fn convert_event(match_id: &str, raw: RawEvent, clamped: &mut usize) -> Result<Event, String> {
    let event_id = raw.id.ok_or("missing id")?;
    let event_kind = match raw.kind.name.as_deref() {
        Some("Pass") => EventKind::Pass,
        Some("Substitution") => EventKind::Substitution,
        _ => EventKind::Other,
    };
    let location = raw
        .location
        .as_deref()
        .map(|l| point_of(l, clamped))
        .transpose()?;
    let team_id = raw.team.and_then(|t| t.id).unwrap_or_default();
    let player_id = raw.player.and_then(|p| p.id);

    let mut pass_detail = None;
    if event_kind == EventKind::Pass {
        if location.is_none() {
            return Err("pass without location".into());
        }
        if player_id.is_none() {
            return Err("pass without player".into());
        }
        if team_id.is_empty() {
            return Err("pass without team".into());
        }
        let pass = raw.pass.ok_or("pass without pass object")?;
        let end_location = pass
            .end_location
            .as_deref()
            .map(|l| point_of(l, clamped))
            .transpose()?;
        pass_detail = Some(PassDetail {
            body_part: pass
                .body_part
                .and_then(|b| b.name)
                .map_or(BodyPart::Other, |n| BodyPart::from_statsbomb(&n)),
            end_location,
            outcome: PassOutcome::from_statsbomb(pass.outcome.and_then(|o| o.name).as_deref()),
            set_piece: pass
                .pass_type
                .and_then(|t| t.name)
                .is_some_and(|n| SET_PIECE_TYPES.contains(&n.as_str())),
        });
    }
    let replacement_id = match (event_kind, raw.substitution) {
        (EventKind::Substitution, Some(s)) => s.replacement.id,
        (EventKind::Substitution, None) => return Err("substitution without replacement".into()),
        _ => None,
    };

    Ok(Event {
        event_id,
        match_id: match_id.to_string(),
        period: raw.period.unwrap_or(1).max(1),
        minute: raw.minute.unwrap_or(0),
        second: raw.second.unwrap_or(0).min(59),
        team_id,
        player_id,
        event_kind,
        location,
        under_pressure: raw.under_pressure.unwrap_or(false),
        pass_detail,
        replacement_id,
    })
}

/// Parse a StatsBomb events file. The match id is not part of the event
/// schema (it is the file name), so the caller supplies it.
pub fn parse_events(match_id: &str, raw: &[u8]) -> Result<Parsed<Event>, IngestError> {
    let mut out = Parsed::default();
    for (index, item) in parse_array(raw)?.into_iter().enumerate() {
        let converted = serde_json::from_value::<RawEvent>(item)
            .map_err(|e| e.to_string())
            .and_then(|r| convert_event(match_id, r, &mut out.clamped));
        match converted {
            Ok(e) => out.records.push(e),
            Err(message) => out.skipped.push(RecordError { index, message }),
        }
    }
    Ok(out)
}

fn convert_frame(raw: RawFrame, out: &mut Parsed<Frame360>) -> Result<Frame360, String> {
    let event_id = raw.event_uuid.ok_or("missing event_uuid")?;
    let visible_area = match raw.visible_area {
        Some(flat) if flat.len() >= 6 && flat.len() % 2 == 0 => {
            let ring = flat
                .chunks(2)
                .map(|c| Point::new(c[0], c[1]).clamp_to_pitch().0)
                .collect();
            Polygon::new(ring).ok()
        }
        _ => None,
    };
    let mut players = Vec::with_capacity(raw.freeze_frame.len());
    let mut seen_actor = false;
    for p in raw.freeze_frame {
        let location = point_of(&p.location, &mut out.clamped)?;
        let mut fp = FramePlayer {
            location,
            teammate: p.teammate,
            actor: p.actor,
            keeper: p.keeper,
        };
        if fp.actor {
            if seen_actor {
                fp.actor = false;
                out.warnings += 1;
            } else if !fp.teammate {
                fp.teammate = true;
                out.warnings += 1;
            }
            seen_actor |= fp.actor;
        }
        players.push(fp);
    }
    Ok(Frame360 {
        event_id,
        visible_area,
        players,
    })
}

/// Parse a StatsBomb 360 file.
pub fn parse_frames(raw: &[u8]) -> Result<Parsed<Frame360>, IngestError> {
    let mut out = Parsed::default();
    for (index, item) in parse_array(raw)?.into_iter().enumerate() {
        let converted = serde_json::from_value::<RawFrame>(item)
            .map_err(|e| e.to_string())
            .and_then(|r| convert_frame(r, &mut out));
        match converted {
            Ok(f) => out.records.push(f),
            Err(message) => out.skipped.push(RecordError { index, message }),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// rosters

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterPlayer {
    pub player_id: String,
    pub name: String,
    pub position: Option<String>,
    pub birth_date: Option<NaiveDate>,
    pub team_id: String,
    pub starter: bool,
}

impl RosterPlayer {
    /// Completed years of age on `reference`.
    pub fn age_on(&self, reference: NaiveDate) -> Option<i32> {
        let b = self.birth_date?;
        let mut age = reference.year() - b.year();
        if (reference.month(), reference.day()) < (b.month(), b.day()) {
            age -= 1;
        }
        Some(age)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Team {
    pub team_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub minute: u32,
    pub team_id: String,
    pub off_player: String,
    pub on_player: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub match_id: String,
    pub teams: Vec<Team>,
    pub players: BTreeMap<String, RosterPlayer>,
    pub substitutions: Vec<Substitution>,
    /// Minute of the last event in the match, once events are attached.
    pub match_end_minute: Option<u32>,
}

impl Roster {
    pub fn starting_xi(&self, team_id: &str) -> Vec<&RosterPlayer> {
        self.players
            .values()
            .filter(|p| p.starter && p.team_id == team_id)
            .collect()
    }

    /// Record substitutions and the final event minute from the match
    /// events. Returns the number of substitution records that were
    /// skipped because they referenced unknown players or brought on a
    /// starter.
    pub fn attach_events(&mut self, events: &[Event]) -> usize {
        let mut skipped = 0;
        self.substitutions.clear();
        for e in events
            .iter()
            .filter(|e| e.event_kind == EventKind::Substitution)
        {
            let (Some(off), Some(on)) = (e.player_id.as_ref(), e.replacement_id.as_ref()) else {
                skipped += 1;
                continue;
            };
            let valid =
                self.players.contains_key(off) && self.players.get(on).is_some_and(|p| !p.starter);
            if !valid {
                log::warn!(
                    "match {}: skipping substitution {off} -> {on}",
                    self.match_id
                );
                skipped += 1;
                continue;
            }
            self.substitutions.push(Substitution {
                minute: e.minute,
                team_id: e.team_id.clone(),
                off_player: off.clone(),
                on_player: on.clone(),
            });
        }
        self.match_end_minute = events.iter().map(|e| e.minute).max();
        skipped
    }
}

/// Parse a StatsBomb lineups file.
pub fn parse_lineups(match_id: &str, raw: &[u8]) -> Result<Roster, IngestError> {
    let items = parse_array(raw)?;
    if items.is_empty() {
        return Err(IngestError::RosterIncomplete("no teams".into()));
    }
    let mut teams = Vec::new();
    let mut players = BTreeMap::new();
    for item in items {
        let raw: RawTeam = serde_json::from_value(item)
            .map_err(|e| IngestError::RosterIncomplete(e.to_string()))?;
        let team_id = raw
            .team_id
            .ok_or_else(|| IngestError::RosterIncomplete("team without id".into()))?;
        if raw.lineup.is_empty() {
            return Err(IngestError::RosterIncomplete(format!(
                "team {team_id} has no players"
            )));
        }
        for p in raw.lineup {
            let Some(player_id) = p.player_id else {
                continue;
            };
            let birth_date = p
                .birth_date
                .as_deref()
                .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok());
            players.insert(
                player_id.clone(),
                RosterPlayer {
                    name: p.player_name.unwrap_or_else(|| player_id.clone()),
                    player_id,
                    position: p.positions.first().and_then(|pos| pos.position.clone()),
                    birth_date,
                    team_id: team_id.clone(),
                    starter: p
                        .positions
                        .iter()
                        .any(|pos| pos.start_reason.as_deref() == Some("Starting XI")),
                },
            );
        }
        teams.push(Team {
            name: raw.team_name.unwrap_or_else(|| team_id.clone()),
            team_id,
        });
    }
    Ok(Roster {
        match_id: match_id.to_string(),
        teams,
        players,
        substitutions: Vec::new(),
        match_end_minute: None,
    })
}

// ---------------------------------------------------------------------------
// join

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinStats {
    pub passes: usize,
    pub snapshots: usize,
    /// Passes without any freeze frame.
    pub unmatched: usize,
    /// Passes whose frame shows no opponent.
    pub without_opponents: usize,
    /// Extra frames for an event id that already had one.
    pub duplicate_frames: usize,
}

/// Join passes to their freeze frames. The first frame seen for an event id
/// wins. Output is sorted by (match, period, minute, second) and stable
/// with respect to input order.
pub fn join_pass_frames(events: &[Event], frames: &[Frame360]) -> (Vec<PassSnapshot>, JoinStats) {
    let mut stats = JoinStats::default();
    let mut by_id: HashMap<&str, &Frame360> = HashMap::with_capacity(frames.len());
    for f in frames {
        if by_id.contains_key(f.event_id.as_str()) {
            stats.duplicate_frames += 1;
        } else {
            by_id.insert(&f.event_id, f);
        }
    }

    let mut snapshots = Vec::new();
    for e in events.iter().filter(|e| e.event_kind == EventKind::Pass) {
        stats.passes += 1;
        let Some(frame) = by_id.get(e.event_id.as_str()) else {
            stats.unmatched += 1;
            continue;
        };
        if frame.opponents().next().is_none() {
            stats.without_opponents += 1;
            continue;
        }
        snapshots.push(
            PassSnapshot {
                event: e.clone(),
                frame: (*frame).clone(),
                attack_sign: AttackDirection::PositiveX,
            }
            .normalized(),
        );
    }
    snapshots.sort_by(|a, b| {
        let ka = (
            &a.event.match_id,
            a.event.period,
            a.event.minute,
            a.event.second,
        );
        let kb = (
            &b.event.match_id,
            b.event.period,
            b.event.minute,
            b.event.second,
        );
        ka.cmp(&kb)
    });
    stats.snapshots = snapshots.len();
    (snapshots, stats)
}

// ---------------------------------------------------------------------------
// writers (StatsBomb schema), used by the synthetic corpus and round trips

fn id_value(id: &str) -> Value {
    match id.parse::<u64>() {
        Ok(n) if n.to_string() == id => json!(n),
        _ => json!(id),
    }
}

fn loc(p: Point) -> Value {
    json!([p.x, p.y])
}

pub fn events_to_json(events: &[Event]) -> Value {
    let items = events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (type_id, type_name) = match e.event_kind {
                EventKind::Pass => (30, "Pass"),
                EventKind::Substitution => (19, "Substitution"),
                EventKind::Other => (0, "Other"),
            };
            let mut o = json!({
                "id": e.event_id,
                "index": i + 1,
                "period": e.period,
                "minute": e.minute,
                "second": e.second,
                "type": { "id": type_id, "name": type_name },
            });
            if !e.team_id.is_empty() {
                o["team"] = json!({ "id": id_value(&e.team_id) });
            }
            if let Some(p) = &e.player_id {
                o["player"] = json!({ "id": id_value(p) });
            }
            if let Some(l) = e.location {
                o["location"] = loc(l);
            }
            if e.under_pressure {
                o["under_pressure"] = json!(true);
            }
            if let Some(d) = &e.pass_detail {
                let mut pass = json!({ "body_part": d.body_part.to_statsbomb() });
                if let Some(end) = d.end_location {
                    pass["end_location"] = loc(end);
                }
                if let Some(outcome) = d.outcome.to_statsbomb() {
                    pass["outcome"] = outcome;
                }
                if d.set_piece {
                    pass["type"] = json!({ "id": 62, "name": "Free Kick" });
                }
                o["pass"] = pass;
            }
            if let Some(r) = &e.replacement_id {
                o["substitution"] = json!({ "replacement": { "id": id_value(r) } });
            }
            o
        })
        .collect();
    Value::Array(items)
}

pub fn frames_to_json(frames: &[Frame360]) -> Value {
    let items = frames
        .iter()
        .map(|f| {
            let mut o = json!({
                "event_uuid": f.event_id,
                "freeze_frame": f.players.iter().map(|p| json!({
                    "teammate": p.teammate,
                    "actor": p.actor,
                    "keeper": p.keeper,
                    "location": loc(p.location),
                })).collect::<Vec<_>>(),
            });
            if let Some(area) = &f.visible_area {
                let flat: Vec<f64> = area.vertices().iter().flat_map(|p| [p.x, p.y]).collect();
                o["visible_area"] = json!(flat);
            }
            o
        })
        .collect();
    Value::Array(items)
}

pub fn lineups_to_json(roster: &Roster) -> Value {
    let items = roster
        .teams
        .iter()
        .map(|t| {
            let lineup: Vec<Value> = roster
                .players
                .values()
                .filter(|p| p.team_id == t.team_id)
                .map(|p| {
                    let mut o = json!({
                        "player_id": id_value(&p.player_id),
                        "player_name": p.name,
                        "positions": [],
                    });
                    if let Some(b) = p.birth_date {
                        o["birth_date"] = json!(b.format("%Y-%m-%d").to_string());
                    }
                    if let Some(pos) = &p.position {
                        let reason = if p.starter {
                            "Starting XI"
                        } else {
                            "Substitution - On"
                        };
                        o["positions"] = json!([{ "position": pos, "start_reason": reason }]);
                    }
                    o
                })
                .collect();
            json!({ "team_id": id_value(&t.team_id), "team_name": t.name, "lineup": lineup })
        })
        .collect();
    Value::Array(items)
}
