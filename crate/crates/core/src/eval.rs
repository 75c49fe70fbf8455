//! Response parsing and scoring against ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Frame;
use crate::grounding::{find_alias_matches, Place, SectionMap};
use crate::scene::DirectionLabel;

/// One vehicle as stated in a response. `None` means the field was not said.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub place: Option<Place>,
    pub direction: Option<DirectionLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    /// Vehicle mentions in textual order.
    pub mentions: Vec<Mention>,
    /// Pedestrian places; parsed but never scored.
    pub pedestrians: Vec<Option<Place>>,
    pub collision_claim: Option<bool>,
    pub mode: ParseMode,
}

/// Strict grammar first; on any unrecognized sentence the whole text is
/// re-read leniently.
pub fn parse_response(text: &str, map: &SectionMap) -> ParsedResponse {
    parse_strict(text, map).unwrap_or_else(|| parse_lenient(text, map))
}

const OFF_MAP: &str = "off the mapped area";

fn place_phrase(s: &str, prep: &str, map: &SectionMap) -> Option<Place> {
    if s == OFF_MAP {
        return Some(Place::OffMap);
    }
    let alias = s.strip_prefix(prep)?.strip_prefix(' ')?;
    map.aliases()
        .any(|a| a == alias)
        .then(|| Place::Section(alias.to_owned()))
}

fn vehicle_number(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn split_sentences(text: &str) -> Option<Vec<&str>> {
    let text = text.trim();
    let body = text.strip_suffix('.')?;
    Some(body.split(". ").collect())
}

/// Exact inverse of the caption grammar; `None` if any sentence deviates.
pub fn parse_strict(text: &str, map: &SectionMap) -> Option<ParsedResponse> {
    let mut out = ParsedResponse {
        mentions: vec![],
        pedestrians: vec![],
        collision_claim: None,
        mode: ParseMode::Strict,
    };
    for s in split_sentences(text)? {
        if s == "No vehicles or pedestrians are present" {
            continue;
        }
        if s == "No collision is observed" {
            out.collision_claim.get_or_insert(false);
            continue;
        }
        if let Some(rest) = s.strip_prefix("A collision has occurred ") {
            let place_part = match rest.strip_prefix("between vehicle ") {
                Some(pair) => {
                    let (first, tail) = pair.split_once(" and vehicle ")?;
                    let (second, place) = tail.split_once(' ')?;
                    vehicle_number(first)?;
                    vehicle_number(second)?;
                    place
                }
                None => rest,
            };
            place_phrase(place_part, "at", map)?;
            out.collision_claim = Some(true);
            continue;
        }
        if let Some(rest) = s.strip_prefix("A pedestrian is ") {
            out.pedestrians.push(Some(place_phrase(rest, "on", map)?));
            continue;
        }
        let rest = s.strip_prefix("Vehicle ")?;
        let (number, rest) = rest.split_once(" is ")?;
        vehicle_number(number)?;
        let mention = if let Some(place) = rest.strip_prefix("stationary ") {
            Mention {
                place: Some(place_phrase(place, "on", map)?),
                direction: Some(DirectionLabel::Stationary),
            }
        } else {
            let (place, dir) = rest.rsplit_once(" moving ")?;
            let direction = DirectionLabel::parse(dir).filter(|d| *d != DirectionLabel::Stationary)?;
            Mention {
                place: Some(place_phrase(place, "on", map)?),
                direction: Some(direction),
            }
        };
        out.mentions.push(mention);
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Vehicle,
    Vehicles,
    Pedestrian,
    Direction(DirectionLabel),
    OffMap,
    Collision,
    Negation,
}

const VEHICLE_WORDS: &[&str] = &[
    "vehicle",
    "car",
    "truck",
    "bus",
    "van",
    "taxi",
    "suv",
    "automobile",
    "sedan",
];
const PLURAL_VEHICLE_WORDS: &[&str] = &[
    "vehicles",
    "cars",
    "trucks",
    "buses",
    "vans",
    "taxis",
    "suvs",
    "automobiles",
    "sedans",
];
const PEDESTRIAN_WORDS: &[&str] = &["pedestrian", "person", "walker"];
const COLLISION_WORDS: &[&str] = &[
    "collision",
    "collisions",
    "collide",
    "collides",
    "collided",
    "colliding",
    "crash",
    "crashes",
    "crashed",
    "accident",
    "accidents",
    "impact",
];
const NEGATION_WORDS: &[&str] = &[
    "no", "not", "without", "never", "none", "nor", "didn't", "don't", "doesn't", "isn't", "wasn't", "hasn't",
    "haven't", "hadn't",
];
const OFF_MAP_PHRASES: &[&str] = &[OFF_MAP, "off the map", "outside the mapped area"];

/// Direction synonym table.
pub const DIRECTION_SYNONYMS: &[(&str, DirectionLabel)] = &[
    ("up", DirectionLabel::Upward),
    ("upward", DirectionLabel::Upward),
    ("upwards", DirectionLabel::Upward),
    ("north", DirectionLabel::Upward),
    ("northward", DirectionLabel::Upward),
    ("northbound", DirectionLabel::Upward),
    ("down", DirectionLabel::Downward),
    ("downward", DirectionLabel::Downward),
    ("downwards", DirectionLabel::Downward),
    ("south", DirectionLabel::Downward),
    ("southward", DirectionLabel::Downward),
    ("southbound", DirectionLabel::Downward),
    ("left", DirectionLabel::Leftward),
    ("leftward", DirectionLabel::Leftward),
    ("leftwards", DirectionLabel::Leftward),
    ("west", DirectionLabel::Leftward),
    ("westward", DirectionLabel::Leftward),
    ("westbound", DirectionLabel::Leftward),
    ("right", DirectionLabel::Rightward),
    ("rightward", DirectionLabel::Rightward),
    ("rightwards", DirectionLabel::Rightward),
    ("east", DirectionLabel::Rightward),
    ("eastward", DirectionLabel::Rightward),
    ("eastbound", DirectionLabel::Rightward),
    ("upper-right", DirectionLabel::UpperRight),
    ("upper right", DirectionLabel::UpperRight),
    ("up and to the right", DirectionLabel::UpperRight),
    ("northeast", DirectionLabel::UpperRight),
    ("north-east", DirectionLabel::UpperRight),
    ("upper-left", DirectionLabel::UpperLeft),
    ("upper left", DirectionLabel::UpperLeft),
    ("up and to the left", DirectionLabel::UpperLeft),
    ("northwest", DirectionLabel::UpperLeft),
    ("north-west", DirectionLabel::UpperLeft),
    ("lower-left", DirectionLabel::LowerLeft),
    ("lower left", DirectionLabel::LowerLeft),
    ("down and to the left", DirectionLabel::LowerLeft),
    ("southwest", DirectionLabel::LowerLeft),
    ("south-west", DirectionLabel::LowerLeft),
    ("lower-right", DirectionLabel::LowerRight),
    ("lower right", DirectionLabel::LowerRight),
    ("down and to the right", DirectionLabel::LowerRight),
    ("southeast", DirectionLabel::LowerRight),
    ("south-east", DirectionLabel::LowerRight),
    ("stationary", DirectionLabel::Stationary),
    ("stopped", DirectionLabel::Stationary),
    ("parked", DirectionLabel::Stationary),
    ("idle", DirectionLabel::Stationary),
    ("not moving", DirectionLabel::Stationary),
    ("standing still", DirectionLabel::Stationary),
];

fn classify(phrase: &str) -> Option<Token> {
    let p = phrase.to_lowercase();
    if VEHICLE_WORDS.contains(&p.as_str()) {
        return Some(Token::Vehicle);
    }
    if PLURAL_VEHICLE_WORDS.contains(&p.as_str()) {
        return Some(Token::Vehicles);
    }
    if PEDESTRIAN_WORDS.contains(&p.as_str()) {
        return Some(Token::Pedestrian);
    }
    if COLLISION_WORDS.contains(&p.as_str()) {
        return Some(Token::Collision);
    }
    if OFF_MAP_PHRASES.contains(&p.as_str()) {
        return Some(Token::OffMap);
    }
    if let Some((_, d)) = DIRECTION_SYNONYMS.iter().find(|(w, _)| *w == p) {
        return Some(Token::Direction(*d));
    }
    if NEGATION_WORDS.contains(&p.as_str()) {
        return Some(Token::Negation);
    }
    None
}

/// Keyword reading of free-form prose. Each vehicle noun opens a mention
/// that takes the first place and first direction that follow it in the same
/// sentence. A plural noun opens a group in which every further place starts
/// another mention. Sentences about collisions contribute only to the claim.
pub fn parse_lenient(text: &str, map: &SectionMap) -> ParsedResponse {
    let mut vocabulary: Vec<&str> = map.aliases().collect();
    vocabulary.extend(VEHICLE_WORDS);
    vocabulary.extend(PLURAL_VEHICLE_WORDS);
    vocabulary.extend(PEDESTRIAN_WORDS);
    vocabulary.extend(COLLISION_WORDS);
    vocabulary.extend(NEGATION_WORDS);
    vocabulary.extend(OFF_MAP_PHRASES);
    vocabulary.extend(DIRECTION_SYNONYMS.iter().map(|(w, _)| *w));

    let mut out = ParsedResponse {
        mentions: vec![],
        pedestrians: vec![],
        collision_claim: None,
        mode: ParseMode::Lenient,
    };
    let (mut affirmed, mut denied) = (false, false);
    for sentence in text.split(['.', '!', '?', ';', '\n']) {
        let hits = find_alias_matches(sentence, vocabulary.iter().copied());
        let is_alias = |a: &str| map.aliases().any(|x| x == a);
        // places as found, tokens otherwise
        let items: Vec<Result<Place, Token>> = hits
            .iter()
            .filter_map(|m| {
                if is_alias(&m.alias) {
                    Some(Ok(Place::Section(m.alias.clone())))
                } else {
                    match classify(&m.alias)? {
                        Token::OffMap => Some(Ok(Place::OffMap)),
                        t => Some(Err(t)),
                    }
                }
            })
            .collect();

        let collision_at = items.iter().position(|i| *i == Err(Token::Collision));
        if let Some(at) = collision_at {
            let negated = items[..at].contains(&Err(Token::Negation));
            if negated {
                denied = true;
            } else {
                affirmed = true;
            }
            continue;
        }

        enum Open {
            None,
            Vehicle(usize),
            /// Plural noun; the mention currently being filled, if any.
            Group(Option<usize>),
            Pedestrian(usize),
        }
        let mut open = Open::None;
        for item in items {
            match item {
                Err(Token::Vehicle) => {
                    out.mentions.push(Mention {
                        place: None,
                        direction: None,
                    });
                    open = Open::Vehicle(out.mentions.len() - 1);
                }
                Err(Token::Vehicles) => open = Open::Group(None),
                Err(Token::Pedestrian) => {
                    out.pedestrians.push(None);
                    open = Open::Pedestrian(out.pedestrians.len() - 1);
                }
                Err(Token::Direction(d)) => {
                    if let Open::Vehicle(i) | Open::Group(Some(i)) = open {
                        out.mentions[i].direction.get_or_insert(d);
                    }
                }
                Ok(place) => match open {
                    Open::Vehicle(i) => {
                        out.mentions[i].place.get_or_insert(place);
                    }
                    Open::Group(current) => {
                        if current.is_none_or(|i| out.mentions[i].place.is_some()) {
                            out.mentions.push(Mention {
                                place: None,
                                direction: None,
                            });
                        }
                        let i = out.mentions.len() - 1;
                        out.mentions[i].place = Some(place);
                        open = Open::Group(Some(i));
                    }
                    Open::Pedestrian(i) => {
                        out.pedestrians[i].get_or_insert(place);
                    }
                    Open::None => {}
                },
                Err(_) => {}
            }
        }
    }
    out.collision_claim = match (affirmed, denied) {
        (true, _) => Some(true),
        (false, true) => Some(false),
        (false, false) => None,
    };
    out
}

/// One ground-truth vehicle and the mention assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMatch {
    pub entity_id: String,
    pub truth_place: Place,
    pub truth_direction: DirectionLabel,
    /// Index into the parsed mentions; `None` when no mention was assigned.
    pub mention: Option<usize>,
    pub location_correct: bool,
    pub steering_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    /// Frame identity; `{camera}/{tick:08}` unless the caller qualifies it.
    pub id: String,
    pub camera_id: String,
    pub tick: u64,
    pub vehicles: usize,
    pub location_correct: usize,
    pub steering_correct: usize,
    pub collision_truth: bool,
    pub collision_claim: Option<bool>,
    pub collision_correct: bool,
    pub parse_mode: ParseMode,
    pub matches: Vec<VehicleMatch>,
    /// Mentions left over after assignment (hallucinated vehicles).
    pub unmatched_mentions: usize,
    /// Response text that was scored, when the caller records it.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub response: String,
}

fn field_hits(m: &Mention, place: &Place, dir: DirectionLabel) -> (bool, bool) {
    (m.place.as_ref() == Some(place), m.direction == Some(dir))
}

/// Maximum-weight assignment of rows to distinct columns (`rows ≤ cols`).
/// Returns the column for each row. Hungarian algorithm on negated weights.
pub fn assign_max(weights: &[Vec<i64>], cols: usize) -> Vec<usize> {
    let n = weights.len();
    let m = cols;
    debug_assert!(n <= m);
    const INF: i64 = i64::MAX / 4;
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Scores one response. Mentions are assigned one-to-one to ground-truth
/// vehicles maximizing total field matches; among equally good assignments,
/// the one with more location matches wins.
pub fn score_frame(parsed: &ParsedResponse, truth: &Frame) -> FrameScore {
    let vehicles: Vec<_> = truth.vehicles().collect();
    let n = vehicles.len();
    let places: Vec<Place> = vehicles
        .iter()
        .map(|v| Place::from_alias(v.section_alias.as_deref()))
        .collect();
    // Columns are mentions plus one "unassigned" slot per vehicle.
    let cols = parsed.mentions.len() + n;
    let k = n as i64 + 1;
    let weights: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            (0..cols)
                .map(|j| match parsed.mentions.get(j) {
                    Some(m) => {
                        let (l, d) = field_hits(m, &places[i], vehicles[i].direction);
                        k * (l as i64 + d as i64) + l as i64
                    }
                    None => 0,
                })
                .collect()
        })
        .collect();
    let assignment = if n == 0 { vec![] } else { assign_max(&weights, cols) };

    let mut matches = Vec::with_capacity(n);
    let mut used = 0;
    for (i, v) in vehicles.iter().enumerate() {
        let mention = Some(assignment[i]).filter(|&j| j < parsed.mentions.len());
        let (l, d) = mention.map_or((false, false), |j| {
            field_hits(&parsed.mentions[j], &places[i], v.direction)
        });
        used += mention.is_some() as usize;
        matches.push(VehicleMatch {
            entity_id: v.entity_id.clone(),
            truth_place: places[i].clone(),
            truth_direction: v.direction,
            mention,
            location_correct: l,
            steering_correct: d,
        });
    }
    FrameScore {
        id: format!("{}/{:08}", truth.camera_id, truth.tick),
        camera_id: truth.camera_id.clone(),
        tick: truth.tick,
        vehicles: n,
        location_correct: matches.iter().filter(|m| m.location_correct).count(),
        steering_correct: matches.iter().filter(|m| m.steering_correct).count(),
        collision_truth: truth.collision_present,
        collision_claim: parsed.collision_claim,
        collision_correct: parsed.collision_claim == Some(truth.collision_present),
        parse_mode: parsed.mode,
        matches,
        unmatched_mentions: parsed.mentions.len() - used,
        response: String::new(),
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no frames to aggregate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames_scored: usize,
    pub vehicles: usize,
    pub location_correct: usize,
    pub steering_correct: usize,
    pub collision_correct: usize,
    pub location_accuracy: f64,
    pub steering_accuracy: f64,
    pub collision_accuracy: f64,
    pub frames: Vec<FrameScore>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro-averaged accuracies over all frames.
pub fn aggregate(frames: Vec<FrameScore>) -> Result<EvalReport, EvalError> {
    if frames.is_empty() {
        return Err(EvalError::Empty);
    }
    let vehicles = frames.iter().map(|f| f.vehicles).sum();
    let location_correct = frames.iter().map(|f| f.location_correct).sum();
    let steering_correct = frames.iter().map(|f| f.steering_correct).sum();
    let collision_correct = frames.iter().filter(|f| f.collision_correct).count();
    Ok(EvalReport {
        frames_scored: frames.len(),
        vehicles,
        location_correct,
        steering_correct,
        collision_correct,
        location_accuracy: ratio(location_correct, vehicles),
        steering_accuracy: ratio(steering_correct, vehicles),
        collision_accuracy: ratio(collision_correct, frames.len()),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{BBox, EntityAnnotation};
    use crate::geometry::Vec2;
    use crate::grounding::{caption_frame, Section};
    use crate::raster::Image;
    use crate::scene::EntityKind;

    fn map() -> SectionMap {
        let sq = |alias: &str| Section {
            alias: alias.into(),
            polygon: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
        };
        SectionMap {
            camera_id: "c".into(),
            sections: vec![sq("the roundabout"), sq("Section A"), sq("Section AB")],
        }
    }

    fn vehicle(id: &str, alias: Option<&str>, dir: DirectionLabel) -> EntityAnnotation {
        EntityAnnotation {
            entity_id: id.into(),
            class: EntityKind::Vehicle,
            bbox: BBox::from([0.0, 0.0, 1.0, 1.0]),
            mask: vec![],
            section_alias: alias.map(str::to_owned),
            direction: dir,
            collided: false,
            collided_with: vec![],
        }
    }

    fn frame(annotations: Vec<EntityAnnotation>, collision: bool) -> Frame {
        Frame {
            camera_id: "c".into(),
            tick: 0,
            image: Image::new(1, 1, [0, 0, 0]),
            annotations,
            collision_present: collision,
        }
    }

    fn mention(place: &str, dir: DirectionLabel) -> Mention {
        Mention {
            place: Some(Place::Section(place.into())),
            direction: Some(dir),
        }
    }

    #[test]
    fn strict_example() {
        let p = parse_response(
            "Vehicle 1 is on the roundabout moving upward. No collision is observed.",
            &map(),
        );
        assert_eq!(p.mode, ParseMode::Strict);
        assert_eq!(p.mentions, vec![mention("the roundabout", DirectionLabel::Upward)]);
        assert_eq!(p.collision_claim, Some(false));
    }

    #[test]
    fn lenient_example() {
        let p = parse_response("A car near the roundabout heading up.", &map());
        assert_eq!(p.mode, ParseMode::Lenient);
        assert_eq!(p.mentions, vec![mention("the roundabout", DirectionLabel::Upward)]);
        assert_eq!(p.collision_claim, None);
    }

    #[test]
    fn lenient_collision_claims() {
        let m = map();
        assert_eq!(
            parse_lenient("There is no collision here", &m).collision_claim,
            Some(false)
        );
        assert_eq!(
            parse_lenient("Two cars crashed on Section A", &m).collision_claim,
            Some(true)
        );
        assert_eq!(
            parse_lenient("The cars didn't collide", &m).collision_claim,
            Some(false)
        );
        assert_eq!(parse_lenient("nothing to see", &m).collision_claim, None);
    }

    #[test]
    fn lenient_prefers_longest_alias_and_compound_direction() {
        let p = parse_lenient(
            "One vehicle on section ab going upper left, a truck parked on Section A.",
            &map(),
        );
        assert_eq!(
            p.mentions,
            vec![
                mention("Section AB", DirectionLabel::UpperLeft),
                mention("Section A", DirectionLabel::Stationary)
            ]
        );
    }

    #[test]
    fn strict_rejects_unknown_alias() {
        assert!(parse_strict(
            "Vehicle 1 is on Section Z moving upward. No collision is observed.",
            &map()
        )
        .is_none());
    }

    #[test]
    fn strict_round_trip_on_caption() {
        let mut a = vehicle("a", Some("Section A"), DirectionLabel::Stationary);
        a.collided = true;
        a.collided_with = vec!["b".into()];
        let mut b = vehicle("b", None, DirectionLabel::Stationary);
        b.collided = true;
        b.collided_with = vec!["a".into()];
        let f = frame(
            vec![a, vehicle("c", Some("Section AB"), DirectionLabel::LowerRight), b],
            true,
        );
        let p = parse_strict(&caption_frame(&f), &map()).unwrap();
        assert_eq!(p.mentions.len(), 3);
        assert_eq!(p.mentions[1], mention("Section AB", DirectionLabel::LowerRight));
        assert_eq!(p.mentions[2].place, Some(Place::OffMap));
        assert_eq!(p.collision_claim, Some(true));
    }

    #[test]
    fn two_vehicles_all_correct() {
        let f = frame(
            vec![
                vehicle("a", Some("Section A"), DirectionLabel::Upward),
                vehicle("b", Some("Section AB"), DirectionLabel::Leftward),
            ],
            false,
        );
        let s = score_frame(&parse_response(&caption_frame(&f), &map()), &f);
        assert_eq!((s.location_correct, s.steering_correct, s.vehicles), (2, 2, 2));
        assert!(s.collision_correct);
    }

    #[test]
    fn one_wrong_section() {
        let f = frame(
            vec![
                vehicle("a", Some("Section A"), DirectionLabel::Upward),
                vehicle("b", Some("Section AB"), DirectionLabel::Leftward),
            ],
            false,
        );
        let parsed = ParsedResponse {
            mentions: vec![
                mention("Section A", DirectionLabel::Upward),
                mention("the roundabout", DirectionLabel::Leftward),
            ],
            pedestrians: vec![],
            collision_claim: Some(false),
            mode: ParseMode::Strict,
        };
        let s = score_frame(&parsed, &f);
        assert_eq!((s.location_correct, s.steering_correct), (1, 2));
    }

    #[test]
    fn missing_claim_is_wrong_even_without_collision() {
        let f = frame(vec![], false);
        let p = parse_response("gibberish", &map());
        assert!(!score_frame(&p, &f).collision_correct);
    }

    #[test]
    fn extra_mentions_do_not_add_credit() {
        let f = frame(vec![vehicle("a", Some("Section A"), DirectionLabel::Upward)], false);
        let parsed = ParsedResponse {
            mentions: vec![
                mention("the roundabout", DirectionLabel::Downward),
                mention("Section A", DirectionLabel::Upward),
                mention("Section A", DirectionLabel::Upward),
            ],
            pedestrians: vec![],
            collision_claim: Some(false),
            mode: ParseMode::Strict,
        };
        let s = score_frame(&parsed, &f);
        assert_eq!(
            (s.location_correct, s.steering_correct, s.unmatched_mentions),
            (1, 1, 2)
        );
        assert_eq!(s.matches[0].mention, Some(1));
    }

    #[test]
    fn micro_average() {
        let mk = |v, l| FrameScore {
            id: String::new(),
            camera_id: "c".into(),
            tick: 0,
            vehicles: v,
            location_correct: l,
            steering_correct: l,
            collision_truth: false,
            collision_claim: Some(false),
            collision_correct: true,
            parse_mode: ParseMode::Strict,
            matches: vec![],
            unmatched_mentions: 0,
            response: String::new(),
        };
        let r = aggregate(vec![mk(4, 3), mk(2, 1)]).unwrap();
        assert!((r.location_accuracy - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.collision_accuracy, 1.0);
        assert!(matches!(aggregate(vec![]), Err(EvalError::Empty)));
    }
}
