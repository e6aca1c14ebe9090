//! Seeded synthetic league in StatsBomb open-data layout.
//!
//! Qualifying passes come in two shapes. Positives face a few opponents
//! spread wide ahead of the ball (large, sparse hull) with the receiver deep
//! inside and a completed pass into the hull. Negatives face a tight cluster
//! of opponents (small, crowded hull) and the pass fails or leaves the hull.
//! Pass origin, pressure and team are drawn the same way for both classes,
//! so only the geometry separates them.

use crate::geometry::{Point, Polygon, PITCH_LENGTH, PITCH_WIDTH};
use crate::ingest::{
    events_to_json, frames_to_json, lineups_to_json, BodyPart, Event, EventKind, Frame360,
    FramePlayer, PassDetail, PassOutcome, Roster, RosterPlayer, Team,
};
use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub matches: usize,
    pub moments_per_match: usize,
    pub positive_share: f64,
    pub teams: usize,
    /// Non-qualifying passes per match (headers, set pieces, deep passes,
    /// passes without a frame).
    pub decoys_per_match: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            matches: 25,
            moments_per_match: 20,
            positive_share: 0.4,
            teams: 8,
            decoys_per_match: 6,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Enough matches for at least `n` qualifying moments.
    pub fn for_moments(n: usize, seed: u64) -> Self {
        let d = Self::default();
        Self {
            matches: n.div_ceil(d.moments_per_match).max(2),
            seed,
            ..d
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthMatch {
    pub match_id: String,
    pub events: Vec<Event>,
    pub frames: Vec<Frame360>,
    pub roster: Roster,
}

const POSITIONS: [&str; 11] = [
    "Goalkeeper",
    "Right Back",
    "Right Center Back",
    "Left Center Back",
    "Left Back",
    "Right Defensive Midfield",
    "Left Defensive Midfield",
    "Center Attacking Midfield",
    "Right Wing",
    "Left Wing",
    "Center Forward",
];
const BENCH: [&str; 3] = [
    "Right Center Back",
    "Left Center Midfield",
    "Center Forward",
];

fn team_id(t: usize) -> String {
    (t + 1).to_string()
}

fn player_id(t: usize, k: usize) -> String {
    ((t + 1) * 100 + k + 1).to_string()
}

fn squad(t: usize, rng: &mut ChaCha8Rng) -> Vec<RosterPlayer> {
    POSITIONS
        .iter()
        .map(|p| (*p, true))
        .chain(BENCH.iter().map(|p| (*p, false)))
        .enumerate()
        .map(|(k, (pos, starter))| RosterPlayer {
            player_id: player_id(t, k),
            name: format!("Player {}-{}", t + 1, k + 1),
            position: Some(pos.to_string()),
            birth_date: NaiveDate::from_ymd_opt(
                rng.gen_range(1990..=2002),
                rng.gen_range(1..=12),
                rng.gen_range(1..=28),
            ),
            team_id: team_id(t),
            starter,
        })
        .collect()
}

/// Round-robin pairings, cycled until `n` fixtures exist.
fn fixtures(teams: usize, n: usize) -> Vec<(usize, usize)> {
    let mut all = Vec::new();
    for i in 0..teams {
        for j in (i + 1)..teams {
            all.push((i, j));
        }
    }
    all.into_iter().cycle().take(n).collect()
}

fn pt(x: f64, y: f64) -> Point {
    Point::new(x.clamp(0.0, PITCH_LENGTH), y.clamp(0.0, PITCH_WIDTH))
}

fn ring(rng: &mut ChaCha8Rng, center: Point, n: usize, r_lo: f64, r_hi: f64) -> Vec<Point> {
    let phase = rng.gen_range(0.0..TAU);
    (0..n)
        .map(|i| {
            let a = phase + TAU * i as f64 / n as f64 + rng.gen_range(-0.2..0.2);
            let r = rng.gen_range(r_lo..r_hi);
            pt(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect()
}

struct Shape {
    frame: Vec<FramePlayer>,
    visible: Polygon,
    end: Point,
    outcome: PassOutcome,
}

fn player(p: Point, teammate: bool) -> FramePlayer {
    FramePlayer {
        location: p,
        teammate,
        actor: false,
        keeper: false,
    }
}

/// Freeze frame for a qualifying pass from `origin`.
fn p3_shape(rng: &mut ChaCha8Rng, origin: Point, positive: bool) -> Shape {
    let center = pt(
        origin.x + rng.gen_range(16.0..20.0),
        (origin.y + rng.gen_range(-10.0..10.0)).clamp(18.0, 62.0),
    );
    let ahead = if positive {
        let n = rng.gen_range(3..=4);
        ring(rng, center, n, 13.0, 16.0)
    } else {
        let n = rng.gen_range(5..=7);
        ring(rng, center, n, 2.5, 4.0)
    };
    let jitter = if positive { 2.0 } else { 0.3 };
    let receiver = pt(
        center.x + rng.gen_range(-jitter..jitter),
        center.y + rng.gen_range(-jitter..jitter),
    );
    let vis_lo = (origin.x - 40.0).max(0.0);
    let visible = Polygon::new(vec![
        Point::new(vis_lo, 0.0),
        Point::new(PITCH_LENGTH, 0.0),
        Point::new(PITCH_LENGTH, PITCH_WIDTH),
        Point::new(vis_lo, PITCH_WIDTH),
    ])
    .expect("non-degenerate rectangle");

    let mut frame = vec![FramePlayer {
        location: origin,
        teammate: true,
        actor: true,
        keeper: false,
    }];
    frame.push(player(receiver, true));
    if positive {
        // a second runner inside the space
        let a = rng.gen_range(0.0..TAU);
        frame.push(player(
            pt(center.x + 5.0 * a.cos(), center.y + 5.0 * a.sin()),
            true,
        ));
    }
    let mut spare = Vec::new();
    let n_spare = if positive { 5 } else { 6 };
    for _ in 0..n_spare {
        let p = pt(
            rng.gen_range(vis_lo..PITCH_LENGTH),
            rng.gen_range(2.0..78.0),
        );
        spare.push(p);
        frame.push(player(p, true));
    }
    frame.extend(ahead.into_iter().map(|p| player(p, false)));
    for _ in 0..3 {
        let x = rng
            .gen_range(vis_lo..origin.x.max(vis_lo + 1.0))
            .min(origin.x - 0.5);
        frame.push(player(pt(x, rng.gen_range(2.0..78.0)), false));
    }
    frame.push(FramePlayer {
        location: pt(rng.gen_range(116.0..119.5), rng.gen_range(36.0..44.0)),
        teammate: false,
        actor: false,
        keeper: true,
    });

    let (end, outcome) = if positive {
        (receiver, PassOutcome::Complete)
    } else if rng.gen_bool(0.5) {
        (receiver, PassOutcome::Incomplete)
    } else {
        // completed, but to a teammate well away from the cluster
        let far = spare
            .iter()
            .copied()
            .max_by(|a, b| a.dist2(center).total_cmp(&b.dist2(center)))
            .unwrap_or(origin);
        (far, PassOutcome::Complete)
    };
    Shape {
        frame,
        visible,
        end,
        outcome,
    }
}

enum Planned {
    Moment { positive: bool },
    Header,
    SetPiece,
    Deep,
    NoFrame,
}

fn match_events(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    match_id: &str,
    home: usize,
    away: usize,
) -> (Vec<Event>, Vec<Frame360>) {
    let n_pos = (cfg.moments_per_match as f64 * cfg.positive_share).round() as usize;
    let mut plan: Vec<Planned> = (0..cfg.moments_per_match)
        .map(|i| Planned::Moment {
            positive: i < n_pos,
        })
        .collect();
    for i in 0..cfg.decoys_per_match {
        plan.push(match i % 4 {
            0 => Planned::Header,
            1 => Planned::SetPiece,
            2 => Planned::Deep,
            _ => Planned::NoFrame,
        });
    }
    plan.shuffle(rng);
    let mut minutes: Vec<u32> = (0..plan.len()).map(|_| rng.gen_range(1..90)).collect();
    minutes.sort_unstable();
    let end_minute = rng.gen_range(90..=96);

    // two substitutions per side
    let mut subs: Vec<(u32, usize, usize, usize)> = Vec::new();
    for team in [home, away] {
        let mut outfield: Vec<usize> = (1..11).collect();
        outfield.shuffle(rng);
        for (b, off) in outfield.into_iter().take(2).enumerate() {
            subs.push((rng.gen_range(55..86), team, off, 11 + b));
        }
    }
    subs.sort_unstable();

    let on_pitch = |team: usize, minute: u32| -> Vec<usize> {
        let mut v: Vec<usize> = (1..11).collect();
        for (m, t, off, on) in &subs {
            if *t == team && *m <= minute {
                v.retain(|k| k != off);
                v.push(*on);
            }
        }
        v
    };

    struct Raw {
        minute: u32,
        second: u32,
        event: Event,
        frame: Option<Frame360>,
    }
    let mut raw: Vec<Raw> = Vec::new();
    let blank = |minute: u32, second: u32, team: usize, kind: EventKind| Event {
        event_id: String::new(),
        match_id: match_id.to_string(),
        period: if minute < 45 { 1 } else { 2 },
        minute,
        second,
        team_id: team_id(team),
        player_id: None,
        event_kind: kind,
        location: None,
        under_pressure: false,
        pass_detail: None,
        replacement_id: None,
    };
    raw.push(Raw {
        minute: 0,
        second: 0,
        event: blank(0, 0, home, EventKind::Other),
        frame: None,
    });
    for (m, t, off, on) in &subs {
        let mut e = blank(*m, 30, *t, EventKind::Substitution);
        e.player_id = Some(player_id(*t, *off));
        e.replacement_id = Some(player_id(*t, *on));
        raw.push(Raw {
            minute: *m,
            second: 30,
            event: e,
            frame: None,
        });
    }
    for (item, minute) in plan.iter().zip(minutes) {
        let second = rng.gen_range(0..60);
        let team = if rng.gen_bool(0.5) { home } else { away };
        let on = on_pitch(team, minute);
        let passer = on[rng.gen_range(0..on.len())];
        let foot = if rng.gen_bool(0.7) {
            BodyPart::RightFoot
        } else {
            BodyPart::LeftFoot
        };
        let in_zone = pt(rng.gen_range(40.0..90.0), rng.gen_range(5.0..75.0));
        let mut e = blank(minute, second, team, EventKind::Pass);
        e.player_id = Some(player_id(team, passer));
        e.under_pressure = rng.gen_bool(0.3);
        let (origin, body_part, set_piece, positive, with_frame) = match item {
            Planned::Moment { positive } => (in_zone, foot, false, *positive, true),
            Planned::Header => (in_zone, BodyPart::Head, false, true, true),
            Planned::SetPiece => (in_zone, foot, true, true, true),
            Planned::Deep => (
                pt(rng.gen_range(10.0..39.0), rng.gen_range(5.0..75.0)),
                foot,
                false,
                true,
                true,
            ),
            Planned::NoFrame => (in_zone, foot, false, true, false),
        };
        let shape = p3_shape(rng, origin, positive);
        e.location = Some(origin);
        e.pass_detail = Some(PassDetail {
            body_part,
            end_location: Some(shape.end),
            outcome: shape.outcome,
            set_piece,
        });
        let frame = with_frame.then(|| Frame360 {
            event_id: String::new(),
            visible_area: Some(shape.visible),
            players: shape.frame,
        });
        raw.push(Raw {
            minute,
            second,
            event: e,
            frame,
        });
    }
    raw.push(Raw {
        minute: end_minute,
        second: 59,
        event: blank(end_minute, 59, away, EventKind::Other),
        frame: None,
    });
    raw.sort_by_key(|r| (r.minute, r.second));

    let mut events = Vec::with_capacity(raw.len());
    let mut frames = Vec::new();
    for (i, mut r) in raw.into_iter().enumerate() {
        let id = format!("{match_id}-{i:04}");
        r.event.event_id = id.clone();
        r.event.period = if r.minute < 45 { 1 } else { 2 };
        if let Some(mut f) = r.frame {
            f.event_id = id;
            frames.push(f);
        }
        events.push(r.event);
    }
    (events, frames)
}

pub fn generate(cfg: &SynthConfig) -> Vec<SynthMatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let teams = cfg.teams.max(2);
    let squads: Vec<Vec<RosterPlayer>> = (0..teams).map(|t| squad(t, &mut rng)).collect();
    fixtures(teams, cfg.matches)
        .into_iter()
        .enumerate()
        .map(|(i, (home, away))| {
            let match_id = (1000 + i).to_string();
            let (events, frames) = match_events(&mut rng, cfg, &match_id, home, away);
            let players: BTreeMap<String, RosterPlayer> = squads[home]
                .iter()
                .chain(&squads[away])
                .map(|p| (p.player_id.clone(), p.clone()))
                .collect();
            let mut roster = Roster {
                match_id: match_id.clone(),
                teams: [home, away]
                    .iter()
                    .map(|t| Team {
                        team_id: team_id(*t),
                        name: format!("Team {}", t + 1),
                    })
                    .collect(),
                players,
                substitutions: Vec::new(),
                match_end_minute: None,
            };
            roster.attach_events(&events);
            SynthMatch {
                match_id,
                events,
                frames,
                roster,
            }
        })
        .collect()
}

/// Write `events/`, `three-sixty/` and `lineups/` files under `data_dir`.
pub fn write_raw(matches: &[SynthMatch], data_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for sub in ["events", "three-sixty", "lineups"] {
        std::fs::create_dir_all(data_dir.join(sub))?;
    }
    for m in matches {
        let files = [
            ("events", events_to_json(&m.events)),
            ("three-sixty", frames_to_json(&m.frames)),
            ("lineups", lineups_to_json(&m.roster)),
        ];
        for (sub, value) in files {
            let path = data_dir.join(sub).join(format!("{}.json", m.match_id));
            std::fs::write(
                &path,
                serde_json::to_vec(&value).expect("json values serialize"),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Scores p ~ U(0, 1) with labels drawn as Bernoulli(p): calibrated by
/// construction.
pub fn calibrated_scores(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p: f64 = rng.gen_range(0.0..1.0);
            (p, rng.gen_bool(p))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{detect_all, DetectConfig, Label};
    use crate::ingest::join_pass_frames;

    fn small() -> SynthConfig {
        SynthConfig {
            matches: 4,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn every_planned_moment_is_detected_with_its_class() {
        let cfg = small();
        for m in generate(&cfg) {
            let (snaps, stats) = join_pass_frames(&m.events, &m.frames);
            let no_frame = (0..cfg.decoys_per_match).filter(|i| i % 4 == 3).count();
            assert_eq!(stats.unmatched, no_frame);
            let (moments, report) = detect_all(&snaps, &DetectConfig::default());
            assert_eq!(moments.len(), cfg.moments_per_match, "{report:?}");
            let pos = moments
                .iter()
                .filter(|m| m.label == Label::Penetrative)
                .count();
            assert_eq!(pos, 8);
            for mo in &moments {
                let area = mo.hull.area();
                if mo.label == Label::Penetrative {
                    assert!(area > 100.0, "sparse hull area {area}");
                } else {
                    assert!(area < 80.0, "crowded hull area {area}");
                }
                assert!(mo.all_players.len() <= 22);
            }
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = generate(&small());
        let b = generate(&small());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.events, y.events);
            assert_eq!(x.frames, y.frames);
            assert_eq!(x.roster, y.roster);
        }
        let c = generate(&SynthConfig { seed: 8, ..small() });
        assert_ne!(a[0].events, c[0].events);
    }

    #[test]
    fn substitutions_recorded() {
        let m = &generate(&small())[0];
        assert_eq!(m.roster.substitutions.len(), 4);
        assert!(m.roster.match_end_minute.unwrap() >= 90);
    }

    #[test]
    fn calibrated_set_is_balanced_around_half() {
        let (s, l) = calibrated_scores(10_000, 1);
        let rate = l.iter().filter(|x| **x).count() as f64 / 1e4;
        assert!((rate - 0.5).abs() < 0.02);
        assert!(s.iter().all(|p| (0.0..1.0).contains(p)));
    }
}
