//! Ground-truth captions in alias vocabulary.
//!
//! A frame is first reduced to a [`SceneDescription`] and then rendered with a
//! fixed sentence grammar. The scripted responder edits descriptions before
//! rendering, and the response parser inverts the same grammar.

use std::fmt::Write;

use crate::camera::Frame;
use crate::scene::{DirectionLabel, EntityKind};

/// Where an entity is, in alias vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Place {
    Section(String),
    OffMap,
}

impl Place {
    pub fn from_alias(alias: Option<&str>) -> Place {
        alias.map_or(Place::OffMap, |a| Place::Section(a.to_owned()))
    }

    pub fn alias(&self) -> Option<&str> {
        match self {
            Place::Section(a) => Some(a),
            Place::OffMap => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneItem {
    /// Vehicles are numbered from 1 in annotation order.
    Vehicle {
        number: usize,
        place: Place,
        direction: DirectionLabel,
    },
    Pedestrian {
        place: Place,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollisionStatement {
    Between {
        first: usize,
        second: usize,
        place: Place,
    },
    /// A collision involving a pedestrian or an off-screen partner.
    At {
        place: Place,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneDescription {
    pub items: Vec<SceneItem>,
    /// Empty means "No collision is observed."
    pub collisions: Vec<CollisionStatement>,
}

impl SceneDescription {
    pub fn vehicle_count(&self) -> usize {
        self.items
            .iter()
            .filter(|i| matches!(i, SceneItem::Vehicle { .. }))
            .count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut sentence = |s: String| {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&s);
        };
        if self.items.is_empty() {
            sentence("No vehicles or pedestrians are present.".into());
        }
        for item in &self.items {
            sentence(match item {
                SceneItem::Vehicle {
                    number,
                    place,
                    direction: DirectionLabel::Stationary,
                } => format!("Vehicle {number} is stationary {}.", on(place)),
                SceneItem::Vehicle {
                    number,
                    place,
                    direction,
                } => format!("Vehicle {number} is {} moving {direction}.", on(place)),
                SceneItem::Pedestrian { place } => format!("A pedestrian is {}.", on(place)),
            });
        }
        if self.collisions.is_empty() {
            sentence("No collision is observed.".into());
        }
        for c in &self.collisions {
            let mut s = String::from("A collision has occurred");
            match c {
                CollisionStatement::Between { first, second, place } => {
                    let _ = write!(s, " between vehicle {first} and vehicle {second} {}.", at(place));
                }
                CollisionStatement::At { place } => {
                    let _ = write!(s, " {}.", at(place));
                }
            }
            sentence(s);
        }
        out
    }
}

fn on(place: &Place) -> String {
    match place {
        Place::Section(alias) => format!("on {alias}"),
        Place::OffMap => "off the mapped area".into(),
    }
}

fn at(place: &Place) -> String {
    match place {
        Place::Section(alias) => format!("at {alias}"),
        Place::OffMap => "off the mapped area".into(),
    }
}

/// Structured caption of a frame's annotations.
pub fn describe_frame(frame: &Frame) -> SceneDescription {
    let mut items = Vec::new();
    // (entity id, vehicle number, place) for every on-screen vehicle
    let mut vehicles: Vec<(&str, usize, Place)> = Vec::new();
    for a in &frame.annotations {
        let place = Place::from_alias(a.section_alias.as_deref());
        match a.class {
            EntityKind::Vehicle => {
                let number = vehicles.len() + 1;
                vehicles.push((&a.entity_id, number, place.clone()));
                items.push(SceneItem::Vehicle {
                    number,
                    place,
                    direction: a.direction,
                });
            }
            EntityKind::Pedestrian => items.push(SceneItem::Pedestrian { place }),
        }
    }

    let mut collisions = Vec::new();
    if frame.collision_present {
        let vehicle_annotations: Vec<_> = frame.vehicles().collect();
        for (i, a) in vehicle_annotations.iter().enumerate() {
            for (j, b) in vehicle_annotations.iter().enumerate().skip(i + 1) {
                if a.collided_with.contains(&b.entity_id) {
                    collisions.push(CollisionStatement::Between {
                        first: i + 1,
                        second: j + 1,
                        place: vehicles[i].2.clone(),
                    });
                }
            }
        }
        if collisions.is_empty() {
            let first = frame
                .annotations
                .iter()
                .find(|a| a.collided)
                .expect("collision_present implies a collided annotation");
            collisions.push(CollisionStatement::At {
                place: Place::from_alias(first.section_alias.as_deref()),
            });
        }
    }
    SceneDescription { items, collisions }
}

/// Deterministic caption of a frame, one sentence per entity followed by the
/// collision verdict.
pub fn caption_frame(frame: &Frame) -> String {
    describe_frame(frame).render()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{BBox, EntityAnnotation};
    use crate::raster::Image;

    fn ann(id: &str, class: EntityKind, alias: Option<&str>, dir: DirectionLabel) -> EntityAnnotation {
        EntityAnnotation {
            entity_id: id.into(),
            class,
            bbox: BBox::from([0.0, 0.0, 1.0, 1.0]),
            mask: vec![],
            section_alias: alias.map(str::to_owned),
            direction: dir,
            collided: false,
            collided_with: vec![],
        }
    }

    fn frame(annotations: Vec<EntityAnnotation>) -> Frame {
        let collision_present = annotations.iter().any(|a| a.collided);
        Frame {
            camera_id: "c".into(),
            tick: 0,
            image: Image::new(1, 1, [0, 0, 0]),
            annotations,
            collision_present,
        }
    }

    #[test]
    fn empty_scene() {
        assert_eq!(
            caption_frame(&frame(vec![])),
            "No vehicles or pedestrians are present. No collision is observed."
        );
    }

    #[test]
    fn single_vehicle() {
        let f = frame(vec![ann(
            "a",
            EntityKind::Vehicle,
            Some("the roundabout"),
            DirectionLabel::Upward,
        )]);
        assert_eq!(
            caption_frame(&f),
            "Vehicle 1 is on the roundabout moving upward. No collision is observed."
        );
    }

    #[test]
    fn mixed_scene_with_collision() {
        let mut a = ann(
            "a",
            EntityKind::Vehicle,
            Some("the three-way junction"),
            DirectionLabel::Stationary,
        );
        let mut b = ann(
            "b",
            EntityKind::Vehicle,
            Some("the three-way junction"),
            DirectionLabel::Stationary,
        );
        a.collided = true;
        a.collided_with = vec!["b".into()];
        b.collided = true;
        b.collided_with = vec!["a".into()];
        let p = ann("p", EntityKind::Pedestrian, None, DirectionLabel::Upward);
        let f = frame(vec![a, p, b]);
        assert_eq!(
            caption_frame(&f),
            "Vehicle 1 is stationary on the three-way junction. A pedestrian is off the mapped area. \
             Vehicle 2 is stationary on the three-way junction. \
             A collision has occurred between vehicle 1 and vehicle 2 at the three-way junction."
        );
    }

    #[test]
    fn collision_with_unseen_partner() {
        let mut a = ann("a", EntityKind::Vehicle, Some("Section B"), DirectionLabel::Stationary);
        a.collided = true;
        a.collided_with = vec!["elsewhere".into()];
        assert_eq!(
            caption_frame(&frame(vec![a])),
            "Vehicle 1 is stationary on Section B. A collision has occurred at Section B."
        );
    }
}
