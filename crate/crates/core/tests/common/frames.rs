//! Synthetic and corpus frames for grammar and grounding checks.

use rand::seq::IndexedRandom;
use rand::Rng;

use trafficmon::camera::{BBox, Camera, EntityAnnotation, Frame};
use trafficmon::grounding::{CollisionStatement, Place, SceneDescription, SceneItem};
use trafficmon::pipeline::{capture_scenario, HighlightOptions};
use trafficmon::raster::Image;
use trafficmon::scene::{load_scenario_dir, DirectionLabel, EntityKind, ScenarioConfig};

pub fn shipped_scenarios() -> Vec<ScenarioConfig> {
    load_scenario_dir(trafficmon::corpus::shipped_dir().join("scenarios")).expect("shipped scenarios load")
}

/// Every ground-truth frame of the shipped corpus with its camera index.
pub fn corpus_frames(cameras: &[Camera]) -> Vec<(usize, Frame)> {
    let mut out = Vec::new();
    for s in shipped_scenarios() {
        capture_scenario(&s, cameras, HighlightOptions::default(), |f| {
            out.push((f.camera_index, f.truth));
            Ok(())
        })
        .expect("capture");
    }
    out
}

/// A frame with random annotations drawn from `camera`'s aliases; pixels are
/// irrelevant to captions and left blank.
pub fn random_frame(rng: &mut impl Rng, camera: &Camera, tick: u64) -> Frame {
    let aliases: Vec<Option<String>> = camera
        .sections
        .aliases()
        .map(|a| Some(a.to_owned()))
        .chain([None])
        .collect();
    let directions: Vec<DirectionLabel> = DirectionLabel::MOVING
        .into_iter()
        .chain([DirectionLabel::Stationary])
        .collect();
    let n = rng.random_range(0..9);
    let mut annotations: Vec<EntityAnnotation> = (0..n)
        .map(|i| {
            let class = if rng.random_bool(0.75) {
                EntityKind::Vehicle
            } else {
                EntityKind::Pedestrian
            };
            EntityAnnotation {
                entity_id: format!("e{i}"),
                class,
                bbox: BBox::from([0.0, 0.0, 1.0, 1.0]),
                mask: vec![],
                section_alias: aliases.choose(rng).cloned().flatten(),
                direction: *directions.choose(rng).expect("non-empty"),
                collided: false,
                collided_with: vec![],
            }
        })
        .collect();
    if n >= 2 && rng.random_bool(0.3) {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let (ida, idb) = (annotations[a].entity_id.clone(), annotations[b].entity_id.clone());
        annotations[a].collided = true;
        annotations[a].collided_with.push(idb);
        annotations[b].collided = true;
        annotations[b].collided_with.push(ida);
    }
    Frame {
        camera_id: camera.id().to_owned(),
        tick,
        image: Image::new(1, 1, [0, 0, 0]),
        collision_present: annotations.iter().any(|a| a.collided),
        annotations,
    }
}

/// Same description with every alias replaced by the camera's real name.
pub fn to_real_names(desc: &SceneDescription, camera: &Camera) -> SceneDescription {
    let real = |p: &Place| match p {
        Place::Section(a) => Place::Section(camera.aliases.real_name(a).expect("registered alias").to_owned()),
        Place::OffMap => Place::OffMap,
    };
    SceneDescription {
        items: desc
            .items
            .iter()
            .map(|i| match i {
                SceneItem::Vehicle {
                    number,
                    place,
                    direction,
                } => SceneItem::Vehicle {
                    number: *number,
                    place: real(place),
                    direction: *direction,
                },
                SceneItem::Pedestrian { place } => SceneItem::Pedestrian { place: real(place) },
            })
            .collect(),
        collisions: desc
            .collisions
            .iter()
            .map(|c| match c {
                CollisionStatement::Between { first, second, place } => CollisionStatement::Between {
                    first: *first,
                    second: *second,
                    place: real(place),
                },
                CollisionStatement::At { place } => CollisionStatement::At { place: real(place) },
            })
            .collect(),
    }
}

pub fn alias_places(desc: &SceneDescription) -> usize {
    let items = desc.items.iter().filter(|i| match i {
        SceneItem::Vehicle { place, .. } | SceneItem::Pedestrian { place } => place.alias().is_some(),
    });
    let collisions = desc.collisions.iter().filter(|c| match c {
        CollisionStatement::Between { place, .. } | CollisionStatement::At { place } => place.alias().is_some(),
    });
    items.count() + collisions.count()
}

/// Ground-truth frame of a shipped scenario as seen by one corpus camera.
pub fn rendered_frame(scenario: &str, camera_id: &str, tick: u64) -> (Camera, Frame) {
    let camera = trafficmon::corpus::cameras()
        .into_iter()
        .find(|c| c.id() == camera_id)
        .expect("corpus camera");
    let config = shipped_scenarios()
        .into_iter()
        .find(|s| s.id == scenario)
        .expect("shipped scenario");
    let run = trafficmon::scene::run_scenario(&config);
    let frame = trafficmon::camera::rasterize_frame(&camera, run.state_at(tick).expect("tick in range"));
    (camera, frame)
}
