//! The shipped desk-scale world: an 8 m × 8 m road network watched by four
//! non-overlapping top-down cameras, and the seeded generator for the
//! 30-scenario corpus.
//!
//! Tiles: the south-west camera sees a four-way junction, the south-east one a
//! three-way junction, the north-west one a roundabout and the north-east one
//! a straight road with a crosswalk and a parking lot. Traffic drives on the
//! right.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracing::debug;

use crate::camera::{Camera, CameraConfig};
use crate::geometry::Vec2;
use crate::grounding::{AliasDb, Section};
use crate::scene::{
    detect_collisions, initial_state, step, EntityKind, EntitySpec, Footprint, LightColor, LightPhase, LightSchedule,
    Pose, RoadSpec, ScenarioConfig, StaticKind, StaticObjectSpec, DEFAULT_TICK_DT,
};

pub const TILE: f64 = 4.0;
pub const SCALE: f64 = 256.0;
pub const RESOLUTION: u32 = 1024;
pub const CAPTURE_PERIOD: u64 = 100;
pub const SCENARIO_COUNT: usize = 30;
/// 1-based indices of the scenarios scripted to contain a crash.
pub const COLLISION_SCENARIOS: [usize; 7] = [3, 7, 11, 15, 19, 24, 28];

pub const VEHICLE: Footprint = Footprint::Rect { hx: 0.2, hy: 0.1 };
pub const PEDESTRIAN: Footprint = Footprint::Disc { radius: 0.06 };

/// Bumper-to-bumper spacing plus vehicle length along a lane.
const GAP: f64 = 0.75;
const RING_CENTER: Vec2 = Vec2::new(2.0, 6.0);
const RING_RADIUS: f64 = 0.9;
const ISLAND_RADIUS: f64 = 1.25;

pub fn scenario_id(index: usize) -> String {
    format!("s{index:02}")
}

pub fn shipped_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn round_to(v: f64, step: f64) -> f64 {
    let r = (v / step).round() * step;
    // strip float noise such as 1.8000000000000003
    format!("{r:.6}").parse().expect("formatted float parses")
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ]
}

fn ngon(center: Vec2, radius: f64, n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|i| center + Vec2::from_angle(std::f64::consts::TAU * i as f64 / n as f64) * radius)
        .collect()
}

struct Tile {
    camera_id: &'static str,
    origin: Vec2,
    /// (alias, real name, world polygon), highest precedence first.
    sections: Vec<(&'static str, &'static str, Vec<Vec2>)>,
}

fn tiles() -> Vec<Tile> {
    let whole = |x: f64, y: f64| rect(x, y, x + TILE, y + TILE);
    vec![
        Tile {
            camera_id: "cam-sw",
            origin: Vec2::new(0.0, 0.0),
            sections: vec![
                (
                    "the four-way junction",
                    "Bank Street at Gladstone Avenue",
                    rect(1.6, 1.6, 2.4, 2.4),
                ),
                ("Section A", "Gladstone Avenue west", rect(0.0, 1.6, 1.6, 2.4)),
                ("Section B", "Gladstone Avenue east", rect(2.4, 1.6, 4.0, 2.4)),
                ("Section C", "Bank Street south", rect(1.6, 0.0, 2.4, 1.6)),
                ("Section D", "Bank Street north", rect(1.6, 2.4, 2.4, 4.0)),
                ("the roadside", "the Bank Street verge", whole(0.0, 0.0)),
            ],
        },
        Tile {
            camera_id: "cam-se",
            origin: Vec2::new(4.0, 0.0),
            sections: vec![
                (
                    "the three-way junction",
                    "Kent Street at Gladstone Avenue",
                    rect(5.6, 1.6, 6.4, 2.4),
                ),
                (
                    "Section E",
                    "Gladstone Avenue near Bank Street",
                    rect(4.0, 1.6, 5.6, 2.4),
                ),
                (
                    "Section F",
                    "Gladstone Avenue near Lyon Street",
                    rect(6.4, 1.6, 8.0, 2.4),
                ),
                ("Section G", "Kent Street", rect(5.6, 0.0, 6.4, 1.6)),
                ("the roadside", "the Kent Street verge", whole(4.0, 0.0)),
            ],
        },
        Tile {
            camera_id: "cam-nw",
            origin: Vec2::new(0.0, 4.0),
            sections: vec![
                ("the roundabout", "Bronson Circle", ngon(RING_CENTER, ISLAND_RADIUS, 32)),
                ("Section H", "Somerset Street west", rect(0.0, 5.6, 2.0, 6.4)),
                ("Section I", "Somerset Street east", rect(2.0, 5.6, 4.0, 6.4)),
                ("Section J", "Bronson Avenue south", rect(1.6, 4.0, 2.4, 6.0)),
                ("Section K", "Bronson Avenue north", rect(1.6, 6.0, 2.4, 8.0)),
                ("the roadside", "the Bronson Avenue verge", whole(0.0, 4.0)),
            ],
        },
        Tile {
            camera_id: "cam-ne",
            origin: Vec2::new(4.0, 4.0),
            sections: vec![
                (
                    "the crosswalk",
                    "the Elgin Street pedestrian crossing",
                    rect(5.85, 5.6, 6.15, 6.4),
                ),
                ("Section L", "Elgin Street west", rect(4.0, 5.6, 5.85, 6.4)),
                ("Section M", "Elgin Street east", rect(6.15, 5.6, 8.0, 6.4)),
                ("the parking lot", "the City Hall car park", rect(4.4, 6.8, 7.6, 7.7)),
                ("the roadside", "the Elgin Street verge", whole(4.0, 4.0)),
            ],
        },
    ]
}

pub fn camera_configs() -> Vec<CameraConfig> {
    tiles()
        .into_iter()
        .map(|t| CameraConfig {
            id: t.camera_id.to_owned(),
            origin: t.origin,
            scale: SCALE,
            resolution: [RESOLUTION, RESOLUTION],
            capture_period_ticks: CAPTURE_PERIOD,
            alias_db: PathBuf::from(format!("aliases/{}.json", t.camera_id)),
        })
        .collect()
}

/// Section polygons in pixel coordinates plus real road names, per camera.
pub fn alias_dbs() -> Vec<AliasDb> {
    tiles()
        .into_iter()
        .zip(camera_configs())
        .map(|(t, config)| {
            let mut names = BTreeMap::new();
            let sections = t
                .sections
                .into_iter()
                .map(|(alias, real, polygon)| {
                    names.insert(alias.to_owned(), real.to_owned());
                    Section {
                        alias: alias.to_owned(),
                        polygon: polygon
                            .into_iter()
                            .map(|p| {
                                let px = crate::camera::project(&config, p);
                                Vec2::new(round_to(px.x, 1e-3), round_to(px.y, 1e-3))
                            })
                            .collect(),
                    }
                })
                .collect();
            AliasDb {
                camera_id: t.camera_id.to_owned(),
                sections,
                names,
            }
        })
        .collect()
}

/// The four corpus cameras built in memory.
pub fn cameras() -> Vec<Camera> {
    camera_configs()
        .into_iter()
        .zip(alias_dbs())
        .map(|(config, db)| {
            let (map, table) = db.split();
            Camera::new(config, map, table).expect("shipped camera configs are valid")
        })
        .collect()
}

fn road(id: &str, polygon: Vec<Vec2>) -> RoadSpec {
    RoadSpec {
        id: id.to_owned(),
        polygon: polygon
            .into_iter()
            .map(|p| [round_to(p.x, 1e-4), round_to(p.y, 1e-4)])
            .collect(),
    }
}

pub fn world_roads() -> Vec<RoadSpec> {
    vec![
        road("gladstone", rect(0.0, 1.6, 8.0, 2.4)),
        road("bank", rect(1.6, 0.0, 2.4, 4.0)),
        road("kent", rect(5.6, 0.0, 6.4, 1.6)),
        road("bronson-circle", ngon(RING_CENTER, ISLAND_RADIUS, 32)),
        road("somerset", rect(0.0, 5.6, 8.0, 6.4)),
        road("bronson", rect(1.6, 4.0, 2.4, 8.0)),
        road("car-park", rect(4.4, 6.8, 7.6, 7.7)),
        road("car-park-entrance", rect(7.0, 6.4, 7.4, 6.8)),
    ]
}

fn fixture(id: &str, kind: StaticKind, x: f64, y: f64, heading: f64) -> StaticObjectSpec {
    StaticObjectSpec {
        id: id.to_owned(),
        kind,
        pose: Pose { x, y, heading },
        light_id: None,
    }
}

fn world_statics(light_offset: u64) -> (Vec<StaticObjectSpec>, Vec<LightSchedule>) {
    use StaticKind::*;
    let mut statics = vec![
        fixture("stop-sw", StopSign, 1.45, 1.45, 0.0),
        fixture("stop-se", StopSign, 2.55, 1.45, 0.0),
        fixture("stop-nw", StopSign, 1.45, 2.55, 0.0),
        fixture("stop-ne", StopSign, 2.55, 2.55, 0.0),
        fixture("yield-kent", YieldSign, 6.55, 1.45, 0.0),
        fixture("roundabout-sign", RoundaboutSign, 1.35, 4.65, 0.0),
        fixture("island-tree", Tree, 2.0, 6.0, 0.0),
        fixture("crosswalk-elgin", Crosswalk, 6.0, 6.0, FRAC_PI_2),
        fixture("tree-sw", Tree, 0.6, 3.3, 0.0),
        fixture("tree-se", Tree, 7.3, 0.5, 0.0),
        fixture("tree-nw", Tree, 0.5, 7.5, 0.0),
        fixture("pole-sw", Pole, 3.4, 1.3, 0.0),
        fixture("pole-se", Pole, 4.6, 2.6, 0.0),
        fixture("pole-ne", Pole, 7.8, 5.4, 0.0),
        fixture("bench-se", Bench, 7.0, 2.8, 0.0),
        fixture("bench-ne", Bench, 5.0, 5.2, 0.0),
        fixture("bench-nw", Bench, 3.4, 7.4, FRAC_PI_2),
    ];
    let mut light = fixture("light-elgin", TrafficLight, 6.55, 6.55, 0.0);
    light.light_id = Some("elgin".into());
    statics.push(light);
    let schedule = LightSchedule {
        id: "elgin".into(),
        phases: vec![
            LightPhase {
                color: LightColor::Green,
                ticks: 240,
            },
            LightPhase {
                color: LightColor::Yellow,
                ticks: 40,
            },
            LightPhase {
                color: LightColor::Red,
                ticks: 200,
            },
        ],
        offset_ticks: light_offset,
    };
    (statics, vec![schedule])
}

// Ring anchor angles in degrees where lanes meet the circulating lane.
fn ring_angle(p: Vec2) -> f64 {
    let d = p - RING_CENTER;
    d.y.atan2(d.x).to_degrees().rem_euclid(360.0)
}

fn ring_point_at(x: Option<f64>, y: Option<f64>, upper: bool, right: bool) -> Vec2 {
    match (x, y) {
        (Some(x), None) => {
            let dy = (RING_RADIUS.powi(2) - (x - RING_CENTER.x).powi(2)).sqrt();
            Vec2::new(x, RING_CENTER.y + if upper { dy } else { -dy })
        }
        (None, Some(y)) => {
            let dx = (RING_RADIUS.powi(2) - (y - RING_CENTER.y).powi(2)).sqrt();
            Vec2::new(RING_CENTER.x + if right { dx } else { -dx }, y)
        }
        _ => unreachable!("exactly one coordinate is fixed"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RingExit {
    North,
    East,
    South,
    West,
}

/// Where the ring lane meets each arm: (entry point, exit point).
fn arm_points(arm: RingExit) -> (Vec2, Vec2) {
    match arm {
        RingExit::South => (
            ring_point_at(Some(2.2), None, false, false),
            ring_point_at(Some(1.8), None, false, false),
        ),
        RingExit::North => (
            ring_point_at(Some(1.8), None, true, false),
            ring_point_at(Some(2.2), None, true, false),
        ),
        RingExit::West => (
            ring_point_at(None, Some(5.8), false, false),
            ring_point_at(None, Some(6.2), false, false),
        ),
        RingExit::East => (
            ring_point_at(None, Some(6.2), false, true),
            ring_point_at(None, Some(5.8), false, true),
        ),
    }
}

fn exit_ray(arm: RingExit) -> Vec2 {
    match arm {
        RingExit::North => Vec2::new(2.2, 14.0),
        RingExit::East => Vec2::new(14.0, 5.8),
        RingExit::South => Vec2::new(1.8, -6.0),
        RingExit::West => Vec2::new(-6.0, 6.2),
    }
}

/// Route entering the roundabout from `from`, circulating counter-clockwise
/// and leaving through `to`.
fn ring_route(from: RingExit, approach: Vec2, to: RingExit) -> Vec<Vec2> {
    let (entry, _) = arm_points(from);
    let (_, exit) = arm_points(to);
    let a0 = ring_angle(entry);
    let mut a1 = ring_angle(exit);
    while a1 <= a0 {
        a1 += 360.0;
    }
    let mut route = vec![approach, entry];
    let steps = ((a1 - a0) / 15.0).ceil() as usize;
    for k in 1..steps {
        let a = (a0 + (a1 - a0) * k as f64 / steps as f64).to_radians();
        route.push(RING_CENTER + Vec2::from_angle(a) * RING_RADIUS);
    }
    route.push(exit);
    route.push(exit_ray(to));
    route
}

fn route_length(route: &[Vec2]) -> f64 {
    route.windows(2).map(|w| (w[1] - w[0]).length()).sum()
}

fn point_at(route: &[Vec2], s: f64) -> Vec2 {
    let mut remaining = s;
    for w in route.windows(2) {
        let len = (w[1] - w[0]).length();
        if remaining <= len {
            return w[0] + (w[1] - w[0]) * (remaining / len);
        }
        remaining -= len;
    }
    *route.last().expect("non-empty route")
}

/// Portion of `route` between arc lengths `a < b`, rounded to 0.1 mm.
fn sub_path(route: &[Vec2], a: f64, b: f64) -> Vec<[f64; 2]> {
    let mut out = vec![point_at(route, a)];
    let mut s = 0.0;
    for w in route.windows(2) {
        s += (w[1] - w[0]).length();
        if s > a + 1e-9 && s < b - 1e-9 {
            out.push(w[1]);
        }
    }
    out.push(point_at(route, b));
    out.into_iter()
        .map(|p| [round_to(p.x, 1e-4), round_to(p.y, 1e-4)])
        .collect()
}

fn line(a: [f64; 2], b: [f64; 2]) -> Vec<Vec2> {
    vec![Vec2::from(a), Vec2::from(b)]
}

fn vehicle(id: String, path: Vec<[f64; 2]>, speed: f64) -> EntitySpec {
    EntitySpec {
        id,
        kind: EntityKind::Vehicle,
        footprint: VEHICLE,
        path,
        speed: round_to(speed, 1e-3),
        spawn_tick: 0,
    }
}

/// Vehicles evenly spaced along one lane at one speed. `window` bounds the
/// arc length where the leader may start.
fn stream(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    route: &[Vec2],
    count: usize,
    window: (f64, f64),
    speed: f64,
) -> Vec<EntitySpec> {
    let len = route_length(route);
    let spacing = GAP + rng.random_range(0.0..0.6);
    let lead = rng.random_range(window.0..window.1);
    (0..count)
        .map(|k| {
            let start = lead - k as f64 * spacing;
            vehicle(
                format!("{prefix}-{}", k + 1),
                sub_path(route, start.max(0.0), len),
                speed,
            )
        })
        .collect()
}

/// Vehicles that drive up to a stop line and wait there in a queue.
fn queue(rng: &mut ChaCha8Rng, prefix: &str, route: &[Vec2], count: usize, speed: f64) -> Vec<EntitySpec> {
    let len = route_length(route);
    let approach = rng.random_range(0.2..(len - (count as f64) * GAP).clamp(0.3, 2.5));
    (0..count)
        .map(|k| {
            let end = len - k as f64 * GAP;
            let start = (end - approach).max(0.0);
            vehicle(format!("{prefix}-{}", k + 1), sub_path(route, start, end), speed)
        })
        .collect()
}

fn pedestrian(id: String, from: [f64; 2], to: [f64; 2], speed: f64, spawn_tick: u64) -> EntitySpec {
    EntitySpec {
        id,
        kind: EntityKind::Pedestrian,
        footprint: PEDESTRIAN,
        path: vec![from, to],
        speed: round_to(speed, 1e-3),
        spawn_tick,
    }
}

const SIDEWALKS: [([f64; 2], [f64; 2]); 8] = [
    ([0.3, 0.4], [1.3, 1.2]),
    ([3.7, 3.6], [2.7, 2.7]),
    ([4.3, 1.2], [5.3, 0.3]),
    ([4.5, 3.0], [7.5, 3.0]),
    ([6.8, 0.4], [7.7, 1.2]),
    ([0.3, 4.3], [1.0, 4.9]),
    ([3.0, 7.2], [3.8, 7.8]),
    ([7.8, 4.4], [4.3, 4.4]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CrashKind {
    /// Northbound car runs the four-way stop into crossing traffic.
    FourWay,
    /// Left turn out of the side street across oncoming traffic.
    ThreeWay,
    /// Car enters the roundabout without yielding.
    Roundabout,
    /// Fast car rear-ends a slow one on the straight road.
    RearEnd,
}

/// Crossing-free traffic for one scenario. `through` selects whether the
/// east-west avenue (`true`) or the north-south avenue flows through the
/// four-way junction; the other direction queues at the stop lines.
fn base_traffic(rng: &mut ChaCha8Rng, through: bool, crash: Option<CrashKind>) -> Vec<EntitySpec> {
    let mut out = Vec::new();
    let speed = |rng: &mut ChaCha8Rng| rng.random_range(0.4..0.9);
    let count = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| rng.random_range(lo..=hi);
    let east_fed;

    if through {
        let eb = line([-3.0, 1.8], [14.0, 1.8]);
        let (n, v) = (count(rng, 2, 5), speed(rng));
        out.extend(stream(rng, "eb", &eb, n, (3.5, 10.0), v));
        let wb = line([11.0, 2.2], [-6.0, 2.2]);
        let (n, v) = (count(rng, 2, 5), speed(rng));
        out.extend(stream(rng, "wb", &wb, n, (3.5, 10.0), v));
        if crash != Some(CrashKind::FourWay) {
            let (n, v) = (count(rng, 0, 2), speed(rng));
            out.extend(queue(rng, "bank-nb", &line([2.2, -3.0], [2.2, 1.35]), n, v));
        }
        let (n, v) = (count(rng, 0, 2), speed(rng));
        out.extend(queue(rng, "bank-sb", &line([1.8, 4.6], [1.8, 2.65]), n, v));
        if crash != Some(CrashKind::ThreeWay) {
            let (n, v) = (count(rng, 0, 2), speed(rng));
            out.extend(queue(rng, "kent-nb", &line([6.2, -3.0], [6.2, 1.35]), n, v));
        }
        // roundabout fed from the west arm only
        let exit = match crash {
            Some(CrashKind::Roundabout | CrashKind::RearEnd) => RingExit::North,
            _ => *[RingExit::North, RingExit::East].choose(rng).expect("non-empty"),
        };
        east_fed = exit == RingExit::East;
        let route = ring_route(RingExit::West, Vec2::new(-3.0, 5.8), exit);
        let (n, v) = (count(rng, 2, 5), speed(rng));
        let window = if east_fed { (2.5, 9.5) } else { (2.5, 6.0) };
        out.extend(stream(rng, "ring", &route, n, window, v));
    } else {
        let exit = *[RingExit::North, RingExit::East, RingExit::West]
            .choose(rng)
            .expect("non-empty");
        east_fed = exit == RingExit::East;
        let route = ring_route(RingExit::South, Vec2::new(2.2, -3.0), exit);
        let (n, v) = (count(rng, 2, 5), speed(rng));
        out.extend(stream(rng, "bank-nb", &route, n, (3.5, 12.0), v));
        let route = ring_route(RingExit::West, Vec2::new(-3.0, 5.8), RingExit::South);
        let (n, v) = (count(rng, 2, 4), speed(rng));
        out.extend(stream(rng, "bank-sb", &route, n, (2.5, 10.0), v));
        let (n, v) = (count(rng, 0, 2), speed(rng));
        out.extend(queue(rng, "gladstone-eb", &line([-3.0, 1.8], [1.35, 1.8]), n, v));
        let (n, v) = (count(rng, 0, 2), speed(rng));
        out.extend(queue(rng, "gladstone-wb", &line([5.5, 2.2], [2.65, 2.2]), n, v));
        let kent_right = vec![
            Vec2::new(6.2, -3.0),
            Vec2::new(6.2, 1.6),
            Vec2::new(6.4, 1.8),
            Vec2::new(14.0, 1.8),
        ];
        let (n, v) = (count(rng, 1, 3), speed(rng));
        out.extend(stream(rng, "kent-right", &kent_right, n, (2.0, 6.0), v));
        let kent_left = vec![
            Vec2::new(11.0, 2.2),
            Vec2::new(6.0, 2.2),
            Vec2::new(5.8, 2.0),
            Vec2::new(5.8, -6.0),
        ];
        let (n, v) = (count(rng, 1, 3), speed(rng));
        out.extend(stream(rng, "kent-left", &kent_left, n, (3.0, 7.0), v));
    }

    if !east_fed && crash != Some(CrashKind::RearEnd) {
        let (n, v) = (count(rng, 1, 3), speed(rng));
        out.extend(stream(
            rng,
            "elgin-eb",
            &line([2.9, 5.8], [14.0, 5.8]),
            n,
            (0.8, 4.8),
            v,
        ));
    }
    let (n, v) = (count(rng, 0, 3), speed(rng));
    out.extend(queue(rng, "elgin-wb", &line([9.8, 6.2], [6.45, 6.2]), n, v));

    let stalls = [4.7, 5.2, 5.7, 6.2];
    let parked = count(rng, 1, 4);
    for (k, x) in stalls.iter().take(parked).enumerate() {
        out.push(vehicle(format!("parked-{}", k + 1), vec![[*x, 7.35], [*x, 7.45]], 0.0));
    }
    if rng.random_bool(0.6) {
        let mut aisle = vec![
            Vec2::new(4.5, 6.95),
            Vec2::new(6.9, 6.95),
            Vec2::new(7.2, 7.25),
            Vec2::new(7.2, 7.5),
        ];
        if rng.random_bool(0.5) {
            aisle.reverse();
        }
        let len = route_length(&aisle);
        let start = rng.random_range(0.0..1.0);
        let v = rng.random_range(0.2..0.5);
        out.push(vehicle("aisle-1".into(), sub_path(&aisle, start, len), v));
    }

    let walkers = count(rng, 1, 4);
    let mut picks: Vec<usize> = (0..SIDEWALKS.len()).collect();
    for k in 0..walkers {
        let i = picks.swap_remove(rng.random_range(0..picks.len()));
        let (mut a, mut b) = SIDEWALKS[i];
        if rng.random_bool(0.5) {
            std::mem::swap(&mut a, &mut b);
        }
        let v = rng.random_range(0.3..0.6);
        let spawn = rng.random_range(0..200);
        out.push(pedestrian(format!("walker-{}", k + 1), a, b, v, spawn));
    }
    let crossers = count(rng, 0, 2);
    for k in 0..crossers {
        let (a, b) = if rng.random_bool(0.5) {
            ([6.0, 5.15], [6.0, 6.7])
        } else {
            ([6.0, 6.7], [6.0, 5.15])
        };
        let v = rng.random_range(0.3..0.5);
        let spawn = rng.random_range(0..400);
        out.push(pedestrian(format!("crosser-{}", k + 1), a, b, v, spawn));
    }
    out
}

/// Arc-length time (seconds) at which a stream member reaches `target`
/// travelling along `path`, if it does so within the window.
fn arrival(e: &EntitySpec, target: Vec2, window: (f64, f64)) -> Option<f64> {
    const TOLERANCE: f64 = 0.05;
    let route: Vec<Vec2> = e.path.iter().map(|&p| Vec2::from(p)).collect();
    let mut s = 0.0;
    for w in route.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.length();
        let t = ((target - w[0]).dot(seg) / (len * len)).clamp(0.0, 1.0);
        if (w[0] + seg * t - target).length() < TOLERANCE {
            let time = (s + t * len) / e.speed;
            return (e.speed > 0.0 && time >= window.0 && time <= window.1).then_some(time);
        }
        s += len;
    }
    None
}

/// Entities added to stage the crash; the last one is `crash-1`.
fn crasher(rng: &mut ChaCha8Rng, kind: CrashKind, traffic: &[EntitySpec]) -> Option<Vec<EntitySpec>> {
    let window = (0.5, 1.8);
    let u = rng.random_range(0.5..0.9);
    let first_arrival = |prefix: &str, target: Vec2| {
        traffic
            .iter()
            .filter(|e| e.id.starts_with(prefix))
            .filter_map(|e| arrival(e, target, window))
            .next()
    };
    let spec = match kind {
        CrashKind::FourWay => {
            let t = first_arrival("eb-", Vec2::new(2.2, 1.8))?;
            let y0 = 1.8 - u * t;
            vehicle(
                "crash-1".into(),
                sub_path(&line([2.2, y0], [2.2, 14.0]), 0.0, 14.0 - y0),
                u,
            )
        }
        CrashKind::ThreeWay => {
            let t = first_arrival("eb-", Vec2::new(6.2, 1.8))?;
            let route = vec![
                Vec2::new(6.2, 1.8 - u * t),
                Vec2::new(6.2, 2.0),
                Vec2::new(6.0, 2.2),
                Vec2::new(-6.0, 2.2),
            ];
            vehicle("crash-1".into(), sub_path(&route, 0.0, route_length(&route)), u)
        }
        CrashKind::Roundabout => {
            let (entry, _) = arm_points(RingExit::East);
            let t = traffic
                .iter()
                .filter(|e| e.id.starts_with("ring-"))
                .find_map(|e| arrival(e, entry, (0.5, 4.0)))?;
            let route = ring_route(RingExit::East, Vec2::new(entry.x + u * t, 6.2), RingExit::West);
            vehicle("crash-1".into(), sub_path(&route, 0.0, route_length(&route)), u)
        }
        CrashKind::RearEnd => {
            let lead_x = rng.random_range(4.2..5.2);
            let slow = rng.random_range(0.1..0.25);
            let fast = rng.random_range(0.7..1.0);
            let t = rng.random_range(window.0..window.1);
            let chase_x = lead_x - 0.45 - (fast - slow) * t;
            let lane = |x: f64| sub_path(&line([x, 5.8], [14.0, 5.8]), 0.0, 14.0 - x);
            return Some(vec![
                vehicle("slow-1".into(), lane(lead_x), slow),
                vehicle("crash-1".into(), lane(chase_x), fast),
            ]);
        }
    };
    Some(vec![spec])
}

/// First collision of a scenario as (tick, entity, entity), simulated
/// without keeping the state history.
pub fn first_collision(config: &ScenarioConfig) -> Option<(u64, String, String)> {
    let mut state = initial_state(config);
    loop {
        if let Some((a, b)) = detect_collisions(&mut state).into_iter().next() {
            return Some((state.tick, a, b));
        }
        if state.tick >= config.duration_ticks {
            return None;
        }
        state = step(&state, config);
    }
}

fn assemble(index: usize, seed: u64, entities: Vec<EntitySpec>, light_offset: u64, crash: bool) -> ScenarioConfig {
    let (statics, lights) = world_statics(light_offset);
    ScenarioConfig {
        id: scenario_id(index),
        description: String::new(),
        seed,
        duration_ticks: if index <= 20 { 600 } else { 500 },
        tick_dt: DEFAULT_TICK_DT,
        roads: world_roads(),
        entities,
        statics,
        lights,
        collision_expected: crash,
    }
}

/// Deterministically generates corpus scenario `index` (1-based). Candidate
/// layouts are drawn until one has no collision, or, for crash scenarios,
/// until the scripted crash happens early enough to be captured.
pub fn generate_scenario(index: usize) -> ScenarioConfig {
    assert!((1..=SCENARIO_COUNT).contains(&index), "scenario index out of range");
    let seed = 7919 * index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crash_kind = COLLISION_SCENARIOS.iter().position(|&i| i == index).map(|k| {
        [
            CrashKind::FourWay,
            CrashKind::ThreeWay,
            CrashKind::Roundabout,
            CrashKind::RearEnd,
        ][k % 4]
    });
    for attempt in 0.. {
        assert!(attempt < 10_000, "scenario {index}: no valid layout found");
        let through = crash_kind.is_some() || rng.random_bool(0.5);
        let light_offset = rng.random_range(0..480);
        let mut entities = base_traffic(&mut rng, through, crash_kind);
        let mut config = assemble(index, seed, entities.clone(), light_offset, crash_kind.is_some());
        if first_collision(&config).is_some() {
            continue;
        }
        let Some(kind) = crash_kind else {
            debug!(index, attempt, "scenario accepted");
            return describe(config, through, None);
        };
        let Some(staged) = crasher(&mut rng, kind, &entities) else {
            continue;
        };
        entities.extend(staged);
        config.entities = entities;
        match first_collision(&config) {
            Some((tick, a, b))
                if tick + CAPTURE_PERIOD <= config.duration_ticks && (a == "crash-1" || b == "crash-1") =>
            {
                debug!(index, attempt, tick, "crash scenario accepted");
                return describe(config, through, Some(kind));
            }
            _ => continue,
        }
    }
    unreachable!()
}

fn describe(mut config: ScenarioConfig, through: bool, crash: Option<CrashKind>) -> ScenarioConfig {
    let flow = if through {
        "east-west traffic through the four-way junction"
    } else {
        "north-south traffic through the four-way junction"
    };
    config.description = match crash {
        None => flow.to_owned(),
        Some(CrashKind::FourWay) => format!("{flow}; a northbound car runs the stop sign"),
        Some(CrashKind::ThreeWay) => format!("{flow}; a left turn from Kent Street cuts off eastbound traffic"),
        Some(CrashKind::Roundabout) => format!("{flow}; a car enters the roundabout without yielding"),
        Some(CrashKind::RearEnd) => format!("{flow}; a fast car rear-ends a slow one on Elgin Street"),
    };
    config
}

pub fn generate_scenarios() -> Vec<ScenarioConfig> {
    (1..=SCENARIO_COUNT).map(generate_scenario).collect()
}

fn pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_vec_pretty(value).expect("corpus values serialize");
    text.push(b'\n');
    text
}

/// Every shipped corpus file as (relative path, bytes).
pub fn corpus_files() -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for s in generate_scenarios() {
        out.push((PathBuf::from(format!("scenarios/{}.json", s.id)), pretty(&s)));
    }
    for db in alias_dbs() {
        out.push((PathBuf::from(format!("aliases/{}.json", db.camera_id)), pretty(&db)));
    }
    out.push((
        PathBuf::from("demo.json"),
        pretty(&crate::service::ServiceConfig::demo()),
    ));
    out
}

/// Writes the corpus files under `root`.
pub fn write_corpus(root: &Path) -> std::io::Result<()> {
    for (rel, bytes) in corpus_files() {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
    }
    Ok(())
}
