//! P3 percentage per player and team, with the eligibility filters used
//! for the player rankings.

use crate::detect::{Label, P3Moment};
use crate::ingest::Roster;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum KpiError {
    #[error("unknown group {0:?} (expected defender, midfielder or u23)")]
    UnknownGroup(String),
    #[error("unknown side {0:?} (expected attack or defense)")]
    UnknownSide(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    CsvIo(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Defender,
    Midfielder,
    U23,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Defender, Group::Midfielder, Group::U23];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Defender => "defender",
            Group::Midfielder => "midfielder",
            Group::U23 => "u23",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = KpiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "defender" | "defenders" => Ok(Group::Defender),
            "midfielder" | "midfielders" => Ok(Group::Midfielder),
            "u23" => Ok(Group::U23),
            _ => Err(KpiError::UnknownGroup(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Attack,
    Defense,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Attack => "attack",
            Side::Defense => "defense",
        }
    }
}

impl FromStr for Side {
    type Err = KpiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attack" => Ok(Side::Attack),
            "defense" | "defence" => Ok(Side::Defense),
            _ => Err(KpiError::UnknownSide(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "n")]
pub enum CountFilter {
    GroupMedian,
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KpiFilters {
    pub min_minutes: u32,
    pub count_filter: CountFilter,
    pub reference_date: NaiveDate,
    pub u23_age_bound: i32,
}

impl Default for KpiFilters {
    fn default() -> Self {
        Self {
            min_minutes: 1140,
            count_filter: CountFilter::GroupMedian,
            reference_date: NaiveDate::from_ymd_opt(2020, 8, 1).expect("valid date"),
            u23_age_bound: 23,
        }
    }
}

/// Minutes per player, summed over matches. Starters play from 0 until
/// substituted off or the final event; substitutes from their entry minute.
pub fn minutes_played(rosters: &[Roster]) -> BTreeMap<String, u32> {
    let mut out: BTreeMap<String, u32> = BTreeMap::new();
    for r in rosters {
        let end = r.match_end_minute.unwrap_or(0);
        let mut on: BTreeMap<&str, u32> = BTreeMap::new();
        let mut off: BTreeMap<&str, u32> = BTreeMap::new();
        for p in r.players.values().filter(|p| p.starter) {
            on.insert(&p.player_id, 0);
        }
        for s in &r.substitutions {
            if !r.players.contains_key(&s.off_player) || !r.players.contains_key(&s.on_player) {
                log::warn!(
                    "match {}: substitution with unknown player skipped",
                    r.match_id
                );
                continue;
            }
            off.entry(&s.off_player).or_insert(s.minute);
            on.entry(&s.on_player).or_insert(s.minute);
        }
        for (player, start) in on {
            let stop = off.get(player).copied().unwrap_or(end).min(end);
            *out.entry(player.to_string()).or_default() += stop.saturating_sub(start);
        }
    }
    out
}

pub fn in_group(
    position: Option<&str>,
    age: Option<i32>,
    group: Group,
    filters: &KpiFilters,
) -> bool {
    match group {
        Group::Defender => {
            position.is_some_and(|p| p.contains("Back") && !p.contains("Goalkeeper"))
        }
        Group::Midfielder => position.is_some_and(|p| p.contains("Midfield")),
        Group::U23 => age.is_some_and(|a| a < filters.u23_age_bound),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerInfo {
    pub player_id: String,
    pub name: String,
    pub team: String,
    pub position: Option<String>,
    pub birth_date: Option<NaiveDate>,
}

/// Merge rosters across matches. The last roster mentioning a player wins
/// for name and team; the first known position and birth date are kept.
pub fn player_directory(rosters: &[Roster]) -> BTreeMap<String, PlayerInfo> {
    let mut out: BTreeMap<String, PlayerInfo> = BTreeMap::new();
    for r in rosters {
        for p in r.players.values() {
            let team = r
                .teams
                .iter()
                .find(|t| t.team_id == p.team_id)
                .map(|t| t.name.clone())
                .unwrap_or_else(|| p.team_id.clone());
            let e = out
                .entry(p.player_id.clone())
                .or_insert_with(|| PlayerInfo {
                    player_id: p.player_id.clone(),
                    name: p.name.clone(),
                    team: team.clone(),
                    position: None,
                    birth_date: None,
                });
            e.name = p.name.clone();
            e.team = team;
            if e.position.is_none() {
                e.position = p.position.clone();
            }
            if e.birth_date.is_none() {
                e.birth_date = p.birth_date;
            }
        }
    }
    out
}

pub fn group_players(
    players: &BTreeMap<String, PlayerInfo>,
    group: Group,
    filters: &KpiFilters,
) -> BTreeSet<String> {
    players
        .values()
        .filter(|p| {
            let age = p.birth_date.map(|b| age_on(b, filters.reference_date));
            in_group(p.position.as_deref(), age, group, filters)
        })
        .map(|p| p.player_id.clone())
        .collect()
}

fn age_on(birth: NaiveDate, reference: NaiveDate) -> i32 {
    reference.years_since(birth).map(|y| y as i32).unwrap_or(-1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerKpiRow {
    pub player_id: String,
    pub name: String,
    pub team: String,
    pub group: Group,
    pub minutes: u32,
    pub potential: u64,
    pub penetrative: u64,
    pub p3_percentage: f64,
}

fn counts_by<'a>(
    moments: impl IntoIterator<Item = &'a P3Moment>,
    key: impl Fn(&P3Moment) -> &str,
) -> BTreeMap<String, (u64, u64)> {
    let mut out: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for m in moments {
        let e = out.entry(key(m).to_string()).or_default();
        e.0 += 1;
        if m.label == Label::Penetrative {
            e.1 += 1;
        }
    }
    out
}

fn median_u64(values: &[u64]) -> Option<f64> {
    let v: Vec<f64> = values.iter().map(|v| *v as f64).collect();
    crate::metrics::median(&v)
}

pub fn player_kpi(
    moments: &[P3Moment],
    minutes: &BTreeMap<String, u32>,
    players: &BTreeMap<String, PlayerInfo>,
    group: Group,
    filters: &KpiFilters,
) -> Vec<PlayerKpiRow> {
    let members = group_players(players, group, filters);
    let counts = counts_by(moments, |m| &m.player_id);
    let active: Vec<u64> = members
        .iter()
        .filter_map(|id| counts.get(id).map(|c| c.0))
        .filter(|p| *p >= 1)
        .collect();
    let min_count = match filters.count_filter {
        CountFilter::GroupMedian => median_u64(&active).unwrap_or(0.0),
        CountFilter::Fixed(n) => n as f64,
    };
    let mut rows: Vec<PlayerKpiRow> = members
        .iter()
        .filter_map(|id| {
            let (potential, penetrative) = *counts.get(id)?;
            let played = minutes.get(id).copied().unwrap_or(0);
            if potential == 0 || played < filters.min_minutes || (potential as f64) < min_count {
                return None;
            }
            let info = &players[id];
            Some(PlayerKpiRow {
                player_id: id.clone(),
                name: info.name.clone(),
                team: info.team.clone(),
                group,
                minutes: played,
                potential,
                penetrative,
                p3_percentage: penetrative as f64 / potential as f64,
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        b.p3_percentage
            .total_cmp(&a.p3_percentage)
            .then_with(|| a.player_id.cmp(&b.player_id))
    });
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamKpiRow {
    pub team_id: String,
    pub side: Side,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub potential: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penetrative: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p3_percentage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub opponent_potential: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matches_played: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub opponent_potential_per_match: Option<f64>,
}

pub fn team_attack_kpi(moments: &[P3Moment]) -> Vec<TeamKpiRow> {
    let mut rows: Vec<TeamKpiRow> = counts_by(moments, |m| &m.team_id)
        .into_iter()
        .map(|(team_id, (potential, penetrative))| TeamKpiRow {
            team_id,
            side: Side::Attack,
            potential: Some(potential),
            penetrative: Some(penetrative),
            p3_percentage: Some(penetrative as f64 / potential as f64),
            opponent_potential: None,
            matches_played: None,
            opponent_potential_per_match: None,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.p3_percentage
            .unwrap_or(0.0)
            .total_cmp(&a.p3_percentage.unwrap_or(0.0))
            .then_with(|| a.team_id.cmp(&b.team_id))
    });
    rows
}

/// Which teams played each match.
pub type Fixtures = BTreeMap<String, Vec<String>>;

pub fn fixtures_from_rosters(rosters: &[Roster]) -> Fixtures {
    rosters
        .iter()
        .map(|r| {
            (
                r.match_id.clone(),
                r.teams.iter().map(|t| t.team_id.clone()).collect(),
            )
        })
        .collect()
}

/// Opponent P3 moments conceded per match played. A moment is charged to
/// every other team listed for its match.
pub fn team_defense_kpi(moments: &[P3Moment], fixtures: &Fixtures) -> Vec<TeamKpiRow> {
    let mut played: BTreeMap<&str, u32> = BTreeMap::new();
    for teams in fixtures.values() {
        for t in teams {
            *played.entry(t).or_default() += 1;
        }
    }
    let mut conceded: BTreeMap<&str, u64> = played.keys().map(|t| (*t, 0)).collect();
    for m in moments {
        let Some(teams) = fixtures.get(&m.match_id) else {
            log::warn!(
                "moment {} belongs to unknown match {}",
                m.moment_id,
                m.match_id
            );
            continue;
        };
        for t in teams.iter().filter(|t| **t != m.team_id) {
            *conceded.entry(t).or_default() += 1;
        }
    }
    let mut rows: Vec<TeamKpiRow> = conceded
        .into_iter()
        .filter_map(|(team, count)| {
            let matches = played.get(team).copied().unwrap_or(0);
            if matches == 0 {
                log::warn!("team {team} has no matches; omitted");
                return None;
            }
            Some(TeamKpiRow {
                team_id: team.to_string(),
                side: Side::Defense,
                potential: None,
                penetrative: None,
                p3_percentage: None,
                opponent_potential: Some(count),
                matches_played: Some(matches),
                opponent_potential_per_match: Some(count as f64 / matches as f64),
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.opponent_potential_per_match
            .unwrap_or(0.0)
            .total_cmp(&b.opponent_potential_per_match.unwrap_or(0.0))
            .then_with(|| a.team_id.cmp(&b.team_id))
    });
    rows
}

pub fn players_csv(rows: &[PlayerKpiRow]) -> Result<Vec<u8>, KpiError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "player_id",
            "name",
            "team",
            "group",
            "minutes",
            "potential",
            "penetrative",
            "p3_percentage",
        ])?;
    }
    w.into_inner().map_err(|e| KpiError::CsvIo(e.into_error()))
}

pub fn teams_csv(rows: &[TeamKpiRow], side: Side) -> Result<Vec<u8>, KpiError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    match side {
        Side::Attack => {
            w.write_record([
                "team_id",
                "side",
                "potential",
                "penetrative",
                "p3_percentage",
            ])?;
            for r in rows {
                w.write_record([
                    r.team_id.clone(),
                    side.as_str().to_string(),
                    r.potential.unwrap_or(0).to_string(),
                    r.penetrative.unwrap_or(0).to_string(),
                    fmt(r.p3_percentage),
                ])?;
            }
        }
        Side::Defense => {
            w.write_record([
                "team_id",
                "side",
                "opponent_potential",
                "matches_played",
                "opponent_potential_per_match",
            ])?;
            for r in rows {
                w.write_record([
                    r.team_id.clone(),
                    side.as_str().to_string(),
                    r.opponent_potential.unwrap_or(0).to_string(),
                    r.matches_played.unwrap_or(0).to_string(),
                    fmt(r.opponent_potential_per_match),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| KpiError::CsvIo(e.into_error()))
}
