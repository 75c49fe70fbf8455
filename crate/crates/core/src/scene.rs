//! Deterministic discrete-time traffic world.
//!
//! Vehicles and pedestrians follow scripted waypoint polylines at constant
//! speed. Collisions are pure geometric overlap: vehicles are oriented
//! rectangles, pedestrians are circles. A collided entity halts and keeps its
//! `collided` flag for the rest of the run.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Circle, OrientedRect, Vec2};

/// Default simulation step: one capture interval of 5 ms.
pub const DEFAULT_TICK_DT: f64 = 0.005;

fn default_tick_dt() -> f64 {
    DEFAULT_TICK_DT
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    Vehicle,
    Pedestrian,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Vehicle => "vehicle",
            EntityKind::Pedestrian => "pedestrian",
        })
    }
}

/// Vehicles are oriented rectangles given by half-extents (length, width);
/// pedestrians are discs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Footprint {
    Rect { hx: f64, hy: f64 },
    Disc { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticKind {
    StopSign,
    YieldSign,
    RoundaboutSign,
    TrafficLight,
    Crosswalk,
    Tree,
    Pole,
    Bench,
}

impl StaticKind {
    /// Trees, poles and benches: scenery a detector may confuse with people.
    pub fn is_distractor(self) -> bool {
        matches!(self, StaticKind::Tree | StaticKind::Pole | StaticKind::Bench)
    }

    pub fn is_sign(self) -> bool {
        matches!(
            self,
            StaticKind::StopSign | StaticKind::YieldSign | StaticKind::RoundaboutSign
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    pub kind: EntityKind,
    pub footprint: Footprint,
    /// Waypoints in world meters.
    pub path: Vec<[f64; 2]>,
    /// Meters per second.
    pub speed: f64,
    #[serde(default)]
    pub spawn_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticObjectSpec {
    pub id: String,
    pub kind: StaticKind,
    pub pose: Pose,
    /// Schedule driving this object; traffic lights only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_id: Option<String>,
}

pub type StaticObject = StaticObjectSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LightColor {
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightPhase {
    pub color: LightColor,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightSchedule {
    pub id: String,
    pub phases: Vec<LightPhase>,
    #[serde(default)]
    pub offset_ticks: u64,
}

impl LightSchedule {
    pub fn color_at(&self, tick: u64) -> LightColor {
        let cycle: u64 = self.phases.iter().map(|p| p.ticks).sum();
        let mut t = (tick + self.offset_ticks) % cycle;
        for phase in &self.phases {
            if t < phase.ticks {
                return phase.color;
            }
            t -= phase.ticks;
        }
        unreachable!("validated schedules have a positive cycle")
    }
}

/// Drivable surface painted under everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub id: String,
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub seed: u64,
    pub duration_ticks: u64,
    #[serde(default = "default_tick_dt")]
    pub tick_dt: f64,
    #[serde(default)]
    pub roads: Vec<RoadSpec>,
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub statics: Vec<StaticObjectSpec>,
    #[serde(default)]
    pub lights: Vec<LightSchedule>,
    #[serde(default)]
    pub collision_expected: bool,
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if self.duration_ticks == 0 {
            return Err(invalid("duration_ticks", "must be > 0"));
        }
        if !(self.tick_dt > 0.0 && self.tick_dt.is_finite()) {
            return Err(invalid("tick_dt", "must be a positive number"));
        }
        let mut seen = HashSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            let at = |f: &str| format!("entities[{i}].{f}");
            if e.id.is_empty() {
                return Err(invalid(at("id"), "must not be empty"));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(invalid(at("id"), format!("duplicate entity id `{}`", e.id)));
            }
            if e.path.is_empty() {
                return Err(invalid(at("path"), "needs at least one waypoint"));
            }
            if e.path.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid(at("path"), "waypoints must be finite"));
            }
            if !(e.speed >= 0.0 && e.speed.is_finite()) {
                return Err(invalid(at("speed"), "must be a non-negative number"));
            }
            match (e.kind, e.footprint) {
                (EntityKind::Vehicle, Footprint::Rect { hx, hy }) => {
                    if !(hx > 0.0 && hy > 0.0) {
                        return Err(invalid(at("footprint"), "half-extents must be > 0"));
                    }
                }
                (EntityKind::Pedestrian, Footprint::Disc { radius }) => {
                    if radius.is_nan() || radius <= 0.0 {
                        return Err(invalid(at("footprint"), "radius must be > 0"));
                    }
                }
                (EntityKind::Vehicle, _) => {
                    return Err(invalid(at("footprint"), "vehicles need {hx, hy}"));
                }
                (EntityKind::Pedestrian, _) => {
                    return Err(invalid(at("footprint"), "pedestrians need {radius}"));
                }
            }
        }
        let mut light_ids = HashSet::new();
        for (i, l) in self.lights.iter().enumerate() {
            if !light_ids.insert(l.id.as_str()) {
                return Err(invalid(format!("lights[{i}].id"), "duplicate light id"));
            }
            if l.phases.iter().map(|p| p.ticks).sum::<u64>() == 0 {
                return Err(invalid(format!("lights[{i}].phases"), "cycle must be > 0 ticks"));
            }
        }
        for (i, s) in self.statics.iter().enumerate() {
            if let Some(light) = &s.light_id {
                if !light_ids.contains(light.as_str()) {
                    return Err(invalid(
                        format!("statics[{i}].light_id"),
                        format!("unknown light `{light}`"),
                    ));
                }
            }
        }
        for (i, r) in self.roads.iter().enumerate() {
            if r.polygon.len() < 3 {
                return Err(invalid(format!("roads[{i}].polygon"), "needs at least 3 vertices"));
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str, origin: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|source| ScenarioError::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path)
}

/// Loads every `*.json` scenario in `dir`, sorted by file name.
pub fn load_scenario_dir(dir: impl AsRef<Path>) -> Result<Vec<ScenarioConfig>, ScenarioError> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths.iter().map(load_scenario).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub pose: Pose,
    /// Current speed; zero once halted.
    pub speed: f64,
    pub footprint: Footprint,
    pub collided: bool,
    #[serde(default)]
    pub collided_with: Vec<String>,
    /// False before the entity's spawn tick.
    pub present: bool,
    /// Distance travelled along the path in meters.
    pub progress: f64,
}

impl Entity {
    pub fn shape(&self) -> Shape {
        match self.footprint {
            Footprint::Rect { hx, hy } => Shape::Rect(OrientedRect::new(
                self.pose.position(),
                Vec2::new(hx, hy),
                self.pose.heading,
            )),
            Footprint::Disc { radius } => Shape::Disc(Circle {
                center: self.pose.position(),
                radius,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect(OrientedRect),
    Disc(Circle),
}

impl Shape {
    pub fn overlaps(&self, other: &Shape) -> bool {
        match (self, other) {
            (Shape::Rect(a), Shape::Rect(b)) => a.overlaps(b),
            (Shape::Rect(r), Shape::Disc(c)) | (Shape::Disc(c), Shape::Rect(r)) => c.overlaps_rect(r),
            (Shape::Disc(a), Shape::Disc(b)) => a.overlaps_circle(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub roads: Vec<RoadSpec>,
    pub statics: Vec<StaticObject>,
    pub light_colors: BTreeMap<String, LightColor>,
}

struct PathCursor {
    position: Vec2,
    heading: f64,
    finished: bool,
}

/// Locates the point `distance` meters along the polyline.
fn walk_path(path: &[[f64; 2]], distance: f64) -> PathCursor {
    let points: Vec<Vec2> = path.iter().map(|p| Vec2::new(p[0], p[1])).collect();
    let mut heading = None;
    let mut remaining = distance;
    for w in points.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.length();
        if len == 0.0 {
            continue;
        }
        let h = normalize_angle(seg.y.atan2(seg.x));
        heading = Some(h);
        if remaining < len {
            return PathCursor {
                position: w[0] + seg * (remaining / len),
                heading: h,
                finished: false,
            };
        }
        remaining -= len;
    }
    PathCursor {
        position: *points.last().expect("validated path"),
        heading: heading.unwrap_or(0.0),
        finished: true,
    }
}

fn path_length(path: &[[f64; 2]]) -> f64 {
    path.windows(2)
        .map(|w| (Vec2::new(w[1][0], w[1][1]) - Vec2::new(w[0][0], w[0][1])).length())
        .sum()
}

fn light_colors(config: &ScenarioConfig, tick: u64) -> BTreeMap<String, LightColor> {
    config.lights.iter().map(|l| (l.id.clone(), l.color_at(tick))).collect()
}

/// World at tick 0.
pub fn initial_state(config: &ScenarioConfig) -> WorldState {
    let entities = config
        .entities
        .iter()
        .map(|spec| {
            let cursor = walk_path(&spec.path, 0.0);
            let present = spec.spawn_tick == 0;
            Entity {
                id: spec.id.clone(),
                kind: spec.kind,
                pose: Pose {
                    x: cursor.position.x,
                    y: cursor.position.y,
                    heading: cursor.heading,
                },
                speed: if cursor.finished { 0.0 } else { spec.speed },
                footprint: spec.footprint,
                collided: false,
                collided_with: Vec::new(),
                present,
                progress: 0.0,
            }
        })
        .collect();
    WorldState {
        tick: 0,
        entities,
        roads: config.roads.clone(),
        statics: config.statics.clone(),
        light_colors: light_colors(config, 0),
    }
}

/// Advances the world by one tick. Collision detection is a separate pass.
pub fn step(state: &WorldState, config: &ScenarioConfig) -> WorldState {
    debug_assert!(state.tick < config.duration_ticks);
    let tick = state.tick + 1;
    let entities = state
        .entities
        .iter()
        .zip(&config.entities)
        .map(|(entity, spec)| {
            let mut next = entity.clone();
            if entity.present && !entity.collided && entity.speed > 0.0 {
                let total = path_length(&spec.path);
                next.progress = (entity.progress + spec.speed * config.tick_dt).min(total);
                let cursor = walk_path(&spec.path, next.progress);
                next.pose = Pose {
                    x: cursor.position.x,
                    y: cursor.position.y,
                    heading: cursor.heading,
                };
                next.speed = if cursor.finished { 0.0 } else { spec.speed };
            }
            if entity.collided {
                next.speed = 0.0;
            }
            next.present = tick >= spec.spawn_tick;
            next
        })
        .collect();
    WorldState {
        tick,
        entities,
        roads: state.roads.clone(),
        statics: state.statics.clone(),
        light_colors: light_colors(config, tick),
    }
}

/// Reports every overlapping pair of present entities, in list order, and
/// marks both members as collided.
pub fn detect_collisions(state: &mut WorldState) -> Vec<(String, String)> {
    let shapes: Vec<Option<Shape>> = state.entities.iter().map(|e| e.present.then(|| e.shape())).collect();
    let mut pairs = Vec::new();
    for i in 0..shapes.len() {
        let Some(a) = &shapes[i] else { continue };
        for j in (i + 1)..shapes.len() {
            let Some(b) = &shapes[j] else { continue };
            if a.overlaps(b) {
                pairs.push((i, j));
            }
        }
    }
    for &(i, j) in &pairs {
        let (a, b) = (state.entities[i].id.clone(), state.entities[j].id.clone());
        mark(&mut state.entities[i], &b);
        mark(&mut state.entities[j], &a);
    }
    pairs
        .into_iter()
        .map(|(i, j)| (state.entities[i].id.clone(), state.entities[j].id.clone()))
        .collect()
}

fn mark(entity: &mut Entity, partner: &str) {
    entity.collided = true;
    entity.speed = 0.0;
    if !entity.collided_with.iter().any(|p| p == partner) {
        entity.collided_with.push(partner.to_owned());
    }
}

/// Full state sequence of one scenario, ticks `0..=duration_ticks`.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub states: Vec<WorldState>,
}

impl ScenarioRun {
    pub fn state_at(&self, tick: u64) -> Option<&WorldState> {
        self.states.get(usize::try_from(tick).ok()?)
    }

    /// True if any entity collided at some point during the run.
    pub fn had_collision(&self) -> bool {
        self.states
            .last()
            .is_some_and(|s| s.entities.iter().any(|e| e.collided))
    }
}

/// Resumes a simulation from `state` until `duration_ticks`, returning the
/// states after `state` (exclusive).
pub fn continue_run(state: &WorldState, config: &ScenarioConfig) -> Vec<WorldState> {
    let mut out = Vec::new();
    let mut current = state.clone();
    while current.tick < config.duration_ticks {
        current = step(&current, config);
        detect_collisions(&mut current);
        out.push(current.clone());
    }
    out
}

pub fn run_scenario(config: &ScenarioConfig) -> ScenarioRun {
    let mut first = initial_state(config);
    detect_collisions(&mut first);
    let mut states = Vec::with_capacity(config.duration_ticks as usize + 1);
    let rest = continue_run(&first, config);
    states.push(first);
    states.extend(rest);
    ScenarioRun {
        config: config.clone(),
        states,
    }
}

/// Quantized steering direction as it appears on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionLabel {
    Rightward,
    UpperRight,
    Upward,
    UpperLeft,
    Leftward,
    LowerLeft,
    Downward,
    LowerRight,
    Stationary,
}

impl DirectionLabel {
    /// The eight moving labels, counter-clockwise from 0°.
    pub const MOVING: [DirectionLabel; 8] = [
        DirectionLabel::Rightward,
        DirectionLabel::UpperRight,
        DirectionLabel::Upward,
        DirectionLabel::UpperLeft,
        DirectionLabel::Leftward,
        DirectionLabel::LowerLeft,
        DirectionLabel::Downward,
        DirectionLabel::LowerRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DirectionLabel::Rightward => "rightward",
            DirectionLabel::UpperRight => "upper-right",
            DirectionLabel::Upward => "upward",
            DirectionLabel::UpperLeft => "upper-left",
            DirectionLabel::Leftward => "leftward",
            DirectionLabel::LowerLeft => "lower-left",
            DirectionLabel::Downward => "downward",
            DirectionLabel::LowerRight => "lower-right",
            DirectionLabel::Stationary => "stationary",
        }
    }

    pub fn parse(s: &str) -> Option<DirectionLabel> {
        Self::MOVING
            .into_iter()
            .chain([DirectionLabel::Stationary])
            .find(|d| d.as_str() == s)
    }
}

impl fmt::Display for DirectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps a heading to one of eight 45° bins centred on the compass labels.
/// Bins are half-open `[c − 22.5°, c + 22.5°)`. Headings within 1e-9° of a
/// bin edge are snapped onto it so radian round-off does not move ties.
pub fn heading_label(heading: f64, speed: f64) -> DirectionLabel {
    if speed == 0.0 {
        return DirectionLabel::Stationary;
    }
    let degrees = normalize_angle(heading).to_degrees();
    let snapped = (degrees * 1e9).round() / 1e9;
    let bin = ((snapped + 22.5) / 45.0).floor() as usize % 8;
    DirectionLabel::MOVING[bin]
}
