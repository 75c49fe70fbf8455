//! Fixed top-down cameras: world → pixel projection, deterministic frame
//! rasterization and per-entity ground-truth annotations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{bounds, centroid, clip_to_box, is_non_degenerate, OrientedRect, Vec2};
use crate::grounding::{section_of, AliasDb, AliasDbError, AliasTable, SectionMap};
use crate::raster::{Image, Rgb};
use crate::scene::{
    heading_label, DirectionLabel, Entity, EntityKind, Footprint, LightColor, ScenarioRun, StaticKind, StaticObject,
    WorldState,
};

pub const DEFAULT_RESOLUTION: [u32; 2] = [1024, 1024];

fn default_resolution() -> [u32; 2] {
    DEFAULT_RESOLUTION
}

fn default_period() -> u64 {
    1
}

/// Camera as written in a service config file. The alias database path is
/// resolved relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub id: String,
    /// World point mapped to the bottom-left pixel.
    pub origin: Vec2,
    /// Pixels per meter.
    pub scale: f64,
    #[serde(default = "default_resolution")]
    pub resolution: [u32; 2],
    #[serde(default = "default_period")]
    pub capture_period_ticks: u64,
    pub alias_db: PathBuf,
}

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("camera `{camera}`: invalid field `{field}`: {message}")]
    Invalid {
        camera: String,
        field: &'static str,
        message: &'static str,
    },
    #[error("camera `{camera}`: {source}")]
    AliasDb {
        camera: String,
        #[source]
        source: AliasDbError,
    },
    #[error("camera `{camera}`: alias database belongs to camera `{found}`")]
    WrongDb { camera: String, found: String },
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |field, message| CameraError::Invalid {
            camera: self.id.clone(),
            field,
            message,
        };
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(bad("scale", "must be > 0"));
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(bad("resolution", "components must be > 0"));
        }
        if self.capture_period_ticks == 0 {
            return Err(bad("capture_period_ticks", "must be >= 1"));
        }
        Ok(())
    }
}

/// A configured camera with its section map and alias table loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub config: CameraConfig,
    pub sections: SectionMap,
    pub aliases: AliasTable,
}

impl Camera {
    pub fn new(config: CameraConfig, sections: SectionMap, aliases: AliasTable) -> Result<Self, CameraError> {
        config.validate()?;
        Ok(Self {
            config,
            sections,
            aliases,
        })
    }

    /// Validates the config and loads its alias database, resolving relative
    /// paths against `base`.
    pub fn load(config: CameraConfig, base: &Path) -> Result<Self, CameraError> {
        config.validate()?;
        let path = if config.alias_db.is_absolute() {
            config.alias_db.clone()
        } else {
            base.join(&config.alias_db)
        };
        let db = AliasDb::load(&path).map_err(|source| CameraError::AliasDb {
            camera: config.id.clone(),
            source,
        })?;
        if db.camera_id != config.id {
            return Err(CameraError::WrongDb {
                camera: config.id.clone(),
                found: db.camera_id,
            });
        }
        let (sections, aliases) = db.split();
        Camera::new(config, sections, aliases)
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn width(&self) -> u32 {
        self.config.resolution[0]
    }

    pub fn height(&self) -> u32 {
        self.config.resolution[1]
    }

    pub fn project(&self, world: Vec2) -> Vec2 {
        project(&self.config, world)
    }

    pub fn unproject(&self, pixel: Vec2) -> Vec2 {
        unproject(&self.config, pixel)
    }
}

/// World meters → image pixels; world +y points image-up. The result may lie
/// outside the frame.
pub fn project(camera: &CameraConfig, world: Vec2) -> Vec2 {
    let height = camera.resolution[1] as f64;
    Vec2::new(
        (world.x - camera.origin.x) * camera.scale,
        height - 1.0 - (world.y - camera.origin.y) * camera.scale,
    )
}

pub fn unproject(camera: &CameraConfig, pixel: Vec2) -> Vec2 {
    let height = camera.resolution[1] as f64;
    Vec2::new(
        pixel.x / camera.scale + camera.origin.x,
        (height - 1.0 - pixel.y) / camera.scale + camera.origin.y,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn of(points: &[Vec2]) -> Option<BBox> {
        let (lo, hi) = bounds(points)?;
        Some(BBox {
            x: lo.x,
            y: lo.y,
            w: hi.x - lo.x,
            h: hi.y - lo.y,
        })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x && p.y >= self.y && p.x <= self.x + self.w && p.y <= self.y + self.h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = ((self.x + self.w).min(other.x + other.w) - self.x.max(other.x)).max(0.0);
        let iy = ((self.y + self.h).min(other.y + other.h) - self.y.max(other.y)).max(0.0);
        let inter = ix * iy;
        let union = self.w * self.h + other.w * other.h - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox {
            x: v[0],
            y: v[1],
            w: v[2],
            h: v[3],
        }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub entity_id: String,
    pub class: EntityKind,
    pub bbox: BBox,
    /// Projected footprint outline clipped to the frame.
    pub mask: Vec<Vec2>,
    pub section_alias: Option<String>,
    pub direction: DirectionLabel,
    pub collided: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collided_with: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub camera_id: String,
    pub tick: u64,
    pub image: Image,
    pub annotations: Vec<EntityAnnotation>,
    pub collision_present: bool,
}

impl Frame {
    pub fn width(&self) -> u32 {
        self.image.width
    }

    pub fn height(&self) -> u32 {
        self.image.height
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &EntityAnnotation> {
        self.annotations.iter().filter(|a| a.class == EntityKind::Vehicle)
    }

    pub fn sidecar(&self) -> FrameSidecar {
        FrameSidecar {
            camera_id: self.camera_id.clone(),
            tick: self.tick,
            width: self.image.width,
            height: self.image.height,
            annotations: self.annotations.clone(),
            collision_present: self.collision_present,
        }
    }

    pub fn from_parts(sidecar: FrameSidecar, image: Image) -> Frame {
        Frame {
            camera_id: sidecar.camera_id,
            tick: sidecar.tick,
            image,
            annotations: sidecar.annotations,
            collision_present: sidecar.collision_present,
        }
    }

    /// `{camera_id}/{tick:08}.ppm`
    pub fn relative_path(&self) -> PathBuf {
        frame_path(&self.camera_id, self.tick, "ppm")
    }
}

pub fn frame_path(camera_id: &str, tick: u64, ext: &str) -> PathBuf {
    PathBuf::from(camera_id).join(format!("{tick:08}.{ext}"))
}

/// Annotation file stored next to each `.ppm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub camera_id: String,
    pub tick: u64,
    pub width: u32,
    pub height: u32,
    pub annotations: Vec<EntityAnnotation>,
    pub collision_present: bool,
}

pub mod palette {
    use crate::raster::Rgb;

    pub const BACKGROUND: Rgb = [46, 102, 52];
    pub const ROAD: Rgb = [112, 112, 112];
    pub const CROSSWALK: Rgb = [236, 236, 236];
    pub const STOP_SIGN: Rgb = [196, 24, 24];
    pub const YIELD_SIGN: Rgb = [236, 200, 40];
    pub const ROUNDABOUT_SIGN: Rgb = [36, 72, 196];
    pub const LIGHT_HOUSING: Rgb = [24, 24, 24];
    pub const LIGHT_RED: Rgb = [255, 40, 40];
    pub const LIGHT_YELLOW: Rgb = [255, 210, 0];
    pub const LIGHT_GREEN: Rgb = [40, 230, 80];
    pub const TREE: Rgb = [20, 64, 24];
    pub const POLE: Rgb = [70, 70, 78];
    pub const BENCH: Rgb = [122, 82, 44];
}

const DISC_SEGMENTS: usize = 16;

fn disc_outline(center: Vec2, radius: f64, segments: usize) -> Vec<Vec2> {
    (0..segments)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / segments as f64;
            center + Vec2::from_angle(a) * radius
        })
        .collect()
}

fn rect(center: Vec2, hx: f64, hy: f64, angle: f64) -> Vec<Vec2> {
    OrientedRect::new(center, Vec2::new(hx, hy), angle).corners().to_vec()
}

/// Footprint outline in world meters.
pub fn entity_outline(entity: &Entity) -> Vec<Vec2> {
    match entity.footprint {
        Footprint::Rect { hx, hy } => rect(entity.pose.position(), hx, hy, entity.pose.heading),
        Footprint::Disc { radius } => disc_outline(entity.pose.position(), radius, DISC_SEGMENTS),
    }
}

/// Outline of a static object in world meters, used both for painting and
/// for highlight regions.
pub fn static_outline(s: &StaticObject) -> Vec<Vec2> {
    let c = s.pose.position();
    let h = s.pose.heading;
    match s.kind {
        StaticKind::StopSign => disc_outline(c, 0.06, 8),
        StaticKind::YieldSign => disc_outline(c, 0.07, 3),
        StaticKind::RoundaboutSign => disc_outline(c, 0.06, DISC_SEGMENTS),
        StaticKind::TrafficLight => rect(c, 0.04, 0.1, h),
        StaticKind::Crosswalk => rect(c, 0.4, 0.15, h),
        StaticKind::Tree => disc_outline(c, 0.15, DISC_SEGMENTS),
        StaticKind::Pole => disc_outline(c, 0.03, DISC_SEGMENTS),
        StaticKind::Bench => rect(c, 0.12, 0.04, h),
    }
}

/// Deterministic per-entity paint color (FNV-1a of the id).
pub fn entity_color(id: &str) -> Rgb {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in id.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    let channel = |shift: u32| 48 + ((hash >> shift) & 0xff) as u8 % 160;
    [channel(0), channel(8), channel(16)]
}

fn paint_static(image: &mut Image, camera: &Camera, s: &StaticObject, state: &WorldState) {
    let to_px = |pts: Vec<Vec2>| -> Vec<Vec2> { pts.into_iter().map(|p| camera.project(p)).collect() };
    let c = s.pose.position();
    match s.kind {
        StaticKind::Crosswalk => {
            let [u, _] = OrientedRect::new(c, Vec2::new(0.4, 0.15), s.pose.heading).axes();
            for k in -2..=2 {
                let stripe_center = c + u * (0.16 * k as f64);
                image.fill_polygon(
                    &to_px(rect(stripe_center, 0.04, 0.15, s.pose.heading)),
                    palette::CROSSWALK,
                );
            }
        }
        StaticKind::TrafficLight => {
            image.fill_polygon(&to_px(static_outline(s)), palette::LIGHT_HOUSING);
            let lamp = match s.light_id.as_ref().and_then(|id| state.light_colors.get(id)) {
                Some(LightColor::Red) => palette::LIGHT_RED,
                Some(LightColor::Yellow) => palette::LIGHT_YELLOW,
                Some(LightColor::Green) | None => palette::LIGHT_GREEN,
            };
            image.fill_disc(camera.project(c), 0.035 * camera.config.scale, lamp);
        }
        kind => {
            let color = match kind {
                StaticKind::StopSign => palette::STOP_SIGN,
                StaticKind::YieldSign => palette::YIELD_SIGN,
                StaticKind::RoundaboutSign => palette::ROUNDABOUT_SIGN,
                StaticKind::Tree => palette::TREE,
                StaticKind::Pole => palette::POLE,
                _ => palette::BENCH,
            };
            image.fill_polygon(&to_px(static_outline(s)), color);
        }
    }
}

/// Paints roads, crosswalks and static objects.
fn paint_background(camera: &Camera, state: &WorldState) -> Image {
    let mut image = Image::new(camera.width(), camera.height(), palette::BACKGROUND);
    for road in &state.roads {
        let poly: Vec<Vec2> = road.polygon.iter().map(|&p| camera.project(Vec2::from(p))).collect();
        image.fill_polygon(&poly, palette::ROAD);
    }
    let (crosswalks, others): (Vec<&StaticObject>, Vec<&StaticObject>) =
        state.statics.iter().partition(|s| s.kind == StaticKind::Crosswalk);
    for s in crosswalks.into_iter().chain(others) {
        paint_static(&mut image, camera, s, state);
    }
    image
}

/// Projected outline clipped to the frame, or `None` when nothing of it is
/// visible.
fn visible_mask(camera: &Camera, outline_world: &[Vec2]) -> Option<Vec<Vec2>> {
    let projected: Vec<Vec2> = outline_world.iter().map(|&p| camera.project(p)).collect();
    let max = Vec2::new(camera.width() as f64 - 1.0, camera.height() as f64 - 1.0);
    let clipped = clip_to_box(&projected, Vec2::new(0.0, 0.0), max);
    is_non_degenerate(&clipped).then_some(clipped)
}

fn annotate(camera: &Camera, entity: &Entity) -> Option<EntityAnnotation> {
    let outline = entity_outline(entity);
    let mask = visible_mask(camera, &outline)?;
    let bbox = BBox::of(&mask)?;
    let center = camera.project(centroid(&outline));
    Some(EntityAnnotation {
        entity_id: entity.id.clone(),
        class: entity.kind,
        bbox,
        mask,
        section_alias: section_of(&camera.sections, center).map(str::to_owned),
        direction: heading_label(entity.pose.heading, entity.speed),
        collided: entity.collided,
        collided_with: entity.collided_with.clone(),
    })
}

/// Renders one camera view of `state` in painter's order: background, roads,
/// crosswalks, statics, vehicles, pedestrians.
pub fn rasterize_frame(camera: &Camera, state: &WorldState) -> Frame {
    let mut image = paint_background(camera, state);
    let present = || state.entities.iter().filter(|e| e.present);
    for kind in [EntityKind::Vehicle, EntityKind::Pedestrian] {
        for e in present().filter(|e| e.kind == kind) {
            let color = entity_color(&e.id);
            match e.footprint {
                Footprint::Disc { radius } => {
                    image.fill_disc(camera.project(e.pose.position()), radius * camera.config.scale, color)
                }
                Footprint::Rect { .. } => {
                    let poly: Vec<Vec2> = entity_outline(e).into_iter().map(|p| camera.project(p)).collect();
                    image.fill_polygon(&poly, color);
                }
            }
        }
    }
    let annotations: Vec<EntityAnnotation> = present().filter_map(|e| annotate(camera, e)).collect();
    let collision_present = annotations.iter().any(|a| a.collided);
    Frame {
        camera_id: camera.id().to_owned(),
        tick: state.tick,
        image,
        annotations,
        collision_present,
    }
}

/// Ticks at which `camera` captures during a run of `duration_ticks`.
pub fn capture_ticks(camera: &CameraConfig, duration_ticks: u64) -> impl Iterator<Item = u64> {
    (0..=duration_ticks).step_by(camera.capture_period_ticks.max(1) as usize)
}

/// One frame per capture period, tick 0 included.
pub fn capture_stream(camera: &Camera, run: &ScenarioRun) -> Vec<Frame> {
    capture_ticks(&camera.config, run.config.duration_ticks)
        .filter_map(|t| run.state_at(t))
        .map(|s| rasterize_frame(camera, s))
        .collect()
}
