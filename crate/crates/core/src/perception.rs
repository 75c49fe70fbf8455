//! Dynamic-object masks and frame highlighting.
//!
//! Detections come either from the ground-truth oracle (with optional seeded
//! corruption) or from a remote segmentation server speaking the
//! `POST /v1/detect` protocol. Highlighting draws 2 px mask outlines and
//! outlines of the pre-registered static regions onto a copy of the frame.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::camera::{static_outline, BBox, Camera, Frame};
use crate::geometry::{clip_to_box, is_non_degenerate, Vec2};
use crate::raster::Rgb;
use crate::scene::{EntityKind, StaticKind, StaticObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionClass {
    Vehicle,
    Person,
}

impl DetectionClass {
    pub fn color(self) -> Rgb {
        match self {
            DetectionClass::Vehicle => [255, 0, 0],
            DetectionClass::Person => [255, 255, 0],
        }
    }

    fn swapped(self) -> Self {
        match self {
            DetectionClass::Vehicle => DetectionClass::Person,
            DetectionClass::Person => DetectionClass::Vehicle,
        }
    }
}

impl From<EntityKind> for DetectionClass {
    fn from(kind: EntityKind) -> Self {
        match kind {
            EntityKind::Vehicle => DetectionClass::Vehicle,
            EntityKind::Pedestrian => DetectionClass::Person,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: DetectionClass,
    pub confidence: f64,
    pub bbox: BBox,
    pub mask: Vec<Vec2>,
}

/// Seeded failure knobs for the oracle detector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Corruption {
    /// Probability an annotation yields no detection.
    #[serde(default)]
    pub drop_rate: f64,
    /// Probability a kept detection gets the other class.
    #[serde(default)]
    pub mislabel_rate: f64,
}

/// Mixes a base seed with a frame identity so every frame draws an
/// independent, reproducible stream.
pub fn frame_seed(seed: u64, camera_id: &str, tick: u64) -> u64 {
    let mut h = seed ^ 0x9e3779b97f4a7c15;
    for b in camera_id.bytes().chain(tick.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3).rotate_left(5);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d049bb133111eb);
    h ^ (h >> 31)
}

/// Ground-truth detector: one detection per annotation at confidence 1.0.
pub fn oracle_detect(frame: &Frame, corruption: Corruption, seed: u64) -> Vec<Detection> {
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, &frame.camera_id, frame.tick));
    let mut out = Vec::with_capacity(frame.annotations.len());
    for a in &frame.annotations {
        // draw both numbers unconditionally so one knob never shifts the other's stream
        let drop = rng.random::<f64>() < corruption.drop_rate;
        let mislabel = rng.random::<f64>() < corruption.mislabel_rate;
        if drop {
            continue;
        }
        let class = DetectionClass::from(a.class);
        out.push(Detection {
            class: if mislabel { class.swapped() } else { class },
            confidence: 1.0,
            bbox: a.bbox,
            mask: a.mask.clone(),
        });
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectRequest {
    pub camera_id: String,
    pub tick: u64,
    pub width: u32,
    pub height: u32,
    /// Base64 of the raw row-major RGB8 buffer.
    pub pixels_b64: String,
}

impl DetectRequest {
    pub fn from_frame(frame: &Frame) -> Self {
        DetectRequest {
            camera_id: frame.camera_id.clone(),
            tick: frame.tick,
            width: frame.width(),
            height: frame.height(),
            pixels_b64: base64::engine::general_purpose::STANDARD.encode(&frame.image.pixels),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectResponse {
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDetection {
    pub class: String,
    pub confidence: f64,
    pub bbox: [f64; 4],
    pub mask: Vec<[f64; 2]>,
}

/// Validates a detector reply and clips geometry to the frame. Any invariant
/// violation rejects the whole reply.
pub fn parse_detect_response(body: &[u8], width: u32, height: u32) -> Result<Vec<Detection>, String> {
    let reply: DetectResponse = serde_json::from_slice(body).map_err(|e| format!("invalid JSON: {e}"))?;
    let max = Vec2::new(width as f64 - 1.0, height as f64 - 1.0);
    reply
        .detections
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let class = match d.class.as_str() {
                "vehicle" => DetectionClass::Vehicle,
                "person" => DetectionClass::Person,
                other => return Err(format!("detections[{i}]: unknown class `{other}`")),
            };
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(format!("detections[{i}]: confidence {} outside [0, 1]", d.confidence));
            }
            if d.bbox.iter().any(|v| !v.is_finite()) || d.bbox[2] < 0.0 || d.bbox[3] < 0.0 {
                return Err(format!("detections[{i}]: invalid bbox"));
            }
            if d.mask.len() < 3 || d.mask.iter().flatten().any(|v| !v.is_finite()) {
                return Err(format!("detections[{i}]: mask needs 3 or more finite vertices"));
            }
            let mask: Vec<Vec2> = d.mask.into_iter().map(Vec2::from).collect();
            let mask = clip_to_box(&mask, Vec2::new(0.0, 0.0), max);
            let bbox = clip_bbox(BBox::from(d.bbox), max);
            Ok(Detection {
                class,
                confidence: d.confidence,
                bbox,
                mask,
            })
        })
        .collect()
}

fn clip_bbox(b: BBox, max: Vec2) -> BBox {
    let x0 = b.x.clamp(0.0, max.x);
    let y0 = b.y.clamp(0.0, max.y);
    let x1 = (b.x + b.w).clamp(0.0, max.x);
    let y1 = (b.y + b.h).clamp(0.0, max.y);
    BBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    }
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("detector {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("detector {endpoint} unreachable: {message}")]
    Transport { endpoint: String, message: String },
    #[error("detector {endpoint} returned HTTP {status}")]
    Status { endpoint: String, status: u16 },
    #[error("detector {endpoint} sent a malformed response: {message}")]
    Malformed { endpoint: String, message: String },
}

/// Client for a remote segmentation server. Cloning shares the in-flight
/// limit.
#[derive(Debug, Clone)]
pub struct RemoteDetector {
    client: reqwest::Client,
    endpoint: String,
    timeout: Duration,
    in_flight: Arc<Semaphore>,
}

impl RemoteDetector {
    /// `endpoint` is the server base URL; requests go to `{endpoint}/v1/detect`.
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_in_flight: usize) -> Self {
        RemoteDetector {
            client: reqwest::Client::new(),
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            timeout,
            in_flight: Arc::new(Semaphore::new(max_in_flight.max(1))),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub async fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, DetectorError> {
        let body = self.detect_raw(frame).await?;
        parse_detect_response(&body, frame.width(), frame.height()).map_err(|message| DetectorError::Malformed {
            endpoint: self.endpoint.clone(),
            message,
        })
    }

    /// Raw response body, for recording fixtures.
    pub async fn detect_raw(&self, frame: &Frame) -> Result<Vec<u8>, DetectorError> {
        let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
        let endpoint = self.endpoint.clone();
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                DetectorError::Timeout {
                    endpoint: endpoint.clone(),
                }
            } else {
                DetectorError::Transport {
                    endpoint: endpoint.clone(),
                    message: e.to_string(),
                }
            }
        };
        let response = self
            .client
            .post(format!("{}/v1/detect", self.endpoint))
            .timeout(self.timeout)
            .json(&DetectRequest::from_frame(frame))
            .send()
            .await
            .map_err(transport)?;
        if !response.status().is_success() {
            return Err(DetectorError::Status {
                endpoint: self.endpoint.clone(),
                status: response.status().as_u16(),
            });
        }
        Ok(response.bytes().await.map_err(transport)?.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    TrafficSign,
    TrafficLight,
    Crosswalk,
    Road,
}

impl RegionKind {
    pub fn color(self) -> Rgb {
        match self {
            RegionKind::TrafficSign => [255, 0, 255],
            RegionKind::TrafficLight => [255, 140, 0],
            RegionKind::Crosswalk => [0, 96, 255],
            RegionKind::Road => [0, 210, 255],
        }
    }
}

/// Pixel region known before the run and highlighted on every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticHighlightRegion {
    pub camera_id: String,
    pub kind: RegionKind,
    pub polygon: Vec<Vec2>,
    pub color: Rgb,
}

/// Road sections of the camera plus visible signs, lights and crosswalks.
pub fn static_regions(camera: &Camera, statics: &[StaticObject]) -> Vec<StaticHighlightRegion> {
    let max = Vec2::new(camera.width() as f64 - 1.0, camera.height() as f64 - 1.0);
    let mut out = Vec::new();
    let mut push = |kind: RegionKind, polygon: Vec<Vec2>| {
        let polygon = clip_to_box(&polygon, Vec2::new(0.0, 0.0), max);
        if is_non_degenerate(&polygon) {
            out.push(StaticHighlightRegion {
                camera_id: camera.id().to_owned(),
                kind,
                polygon,
                color: kind.color(),
            });
        }
    };
    for section in &camera.sections.sections {
        push(RegionKind::Road, section.polygon.clone());
    }
    for s in statics {
        let kind = match s.kind {
            k if k.is_sign() => RegionKind::TrafficSign,
            StaticKind::TrafficLight => RegionKind::TrafficLight,
            StaticKind::Crosswalk => RegionKind::Crosswalk,
            _ => continue,
        };
        push(kind, static_outline(s).into_iter().map(|p| camera.project(p)).collect());
    }
    out
}

/// Returns a highlighted copy of `frame`: static regions first, then
/// detection masks, all as 2 px outlines.
pub fn overlay_highlight(frame: &Frame, detections: &[Detection], statics: &[StaticHighlightRegion]) -> Frame {
    let mut out = frame.clone();
    for region in statics {
        out.image.draw_outline(&region.polygon, region.color);
    }
    for d in detections {
        out.image.draw_outline(&d.mask, d.class.color());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: BTreeMap<DetectionClass, ClassCounts>,
}

impl ConfusionMatrix {
    pub fn with(class: DetectionClass, tp: u64, fp: u64, fn_: u64) -> Self {
        let mut cm = ConfusionMatrix::default();
        cm.classes.insert(class, ClassCounts { tp, fp, fn_ });
        cm
    }

    /// Adds one frame: detections are matched greedily (highest confidence
    /// first) to same-class annotations with bbox IoU ≥ `min_iou`.
    pub fn tally(&mut self, truth: &Frame, detections: &[Detection], min_iou: f64) {
        let mut order: Vec<usize> = (0..detections.len()).collect();
        order.sort_by(|&a, &b| detections[b].confidence.total_cmp(&detections[a].confidence));
        let mut used = vec![false; truth.annotations.len()];
        for i in order {
            let d = &detections[i];
            let best = truth
                .annotations
                .iter()
                .enumerate()
                .filter(|(j, a)| !used[*j] && DetectionClass::from(a.class) == d.class)
                .map(|(j, a)| (j, a.bbox.iou(&d.bbox)))
                .filter(|(_, iou)| *iou >= min_iou)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let counts = self.classes.entry(d.class).or_default();
            match best {
                Some((j, _)) => {
                    used[j] = true;
                    counts.tp += 1;
                }
                None => counts.fp += 1,
            }
        }
        for (j, a) in truth.annotations.iter().enumerate() {
            if !used[j] {
                self.classes.entry(a.class.into()).or_default().fn_ += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn class_metrics(c: ClassCounts) -> ClassMetrics {
    let (tp, fp, fn_) = (c.tp as f64, c.fp as f64, c.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    ClassMetrics {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

/// Per-class precision, recall and F1; any 0/0 is reported as 0.
pub fn detector_metrics(cm: &ConfusionMatrix) -> BTreeMap<DetectionClass, ClassMetrics> {
    cm.classes
        .iter()
        .map(|(class, counts)| (*class, class_metrics(*counts)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::EntityAnnotation;
    use crate::raster::{outline_pixels, Image};
    use crate::scene::DirectionLabel;

    fn ann(id: &str, class: EntityKind, x: f64) -> EntityAnnotation {
        let mask = vec![
            Vec2::new(x, 10.0),
            Vec2::new(x + 8.0, 10.0),
            Vec2::new(x + 8.0, 14.0),
            Vec2::new(x, 14.0),
        ];
        EntityAnnotation {
            entity_id: id.into(),
            class,
            bbox: BBox::of(&mask).unwrap(),
            mask,
            section_alias: None,
            direction: DirectionLabel::Upward,
            collided: false,
            collided_with: vec![],
        }
    }

    fn frame() -> Frame {
        Frame {
            camera_id: "c".into(),
            tick: 3,
            image: Image::new(64, 32, [10, 20, 30]),
            annotations: vec![
                ann("a", EntityKind::Vehicle, 2.0),
                ann("b", EntityKind::Vehicle, 20.0),
                ann("p", EntityKind::Pedestrian, 40.0),
            ],
            collision_present: false,
        }
    }

    #[test]
    fn oracle_is_identity_without_corruption() {
        let f = frame();
        let d = oracle_detect(&f, Corruption::default(), 9);
        assert_eq!(d.len(), 3);
        for (det, a) in d.iter().zip(&f.annotations) {
            assert_eq!(det.class, DetectionClass::from(a.class));
            assert_eq!(det.confidence, 1.0);
            assert_eq!(det.mask, a.mask);
        }
        assert_eq!(d[2].class, DetectionClass::Person);
    }

    #[test]
    fn drop_everything() {
        let d = oracle_detect(
            &frame(),
            Corruption {
                drop_rate: 1.0,
                mislabel_rate: 0.0,
            },
            1,
        );
        assert!(d.is_empty());
    }

    #[test]
    fn overlay_identity_and_locality() {
        let f = frame();
        let same = overlay_highlight(&f, &[], &[]);
        assert_eq!(same.image, f.image);

        let dets = oracle_detect(&f, Corruption::default(), 0);
        let out = overlay_highlight(&f, &dets[..1], &[]);
        assert_eq!((out.width(), out.height()), (f.width(), f.height()));
        let outline: std::collections::HashSet<_> = outline_pixels(&dets[0].mask, f.width(), f.height())
            .into_iter()
            .collect();
        for y in 0..f.height() {
            for x in 0..f.width() {
                let changed = out.image.get(x, y) != f.image.get(x, y);
                assert_eq!(changed, outline.contains(&(x, y)), "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn metric_conventions() {
        let m = class_metrics(ClassCounts::default());
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = class_metrics(ClassCounts { tp: 0, fp: 3, fn_: 2 });
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let body =
            br#"{"detections":[{"class":"vehicle","confidence":1.7,"bbox":[0,0,2,2],"mask":[[0,0],[2,0],[2,2]]}]}"#;
        let err = parse_detect_response(body, 10, 10).unwrap_err();
        assert!(err.contains("confidence"), "{err}");
    }

    #[test]
    fn clips_geometry_to_frame() {
        let body = br#"{"detections":[{"class":"person","confidence":0.5,"bbox":[-4,5,20,20],"mask":[[-4,5],[16,5],[16,25]]}]}"#;
        let d = parse_detect_response(body, 10, 10).unwrap();
        assert_eq!(d[0].bbox, BBox::from([0.0, 5.0, 9.0, 4.0]));
        assert!(d[0].mask.iter().all(|p| p.x >= 0.0 && p.x <= 9.0 && p.y <= 9.0));
    }

    #[test]
    fn tally_counts_matches() {
        let f = frame();
        let mut dets = oracle_detect(&f, Corruption::default(), 0);
        dets.remove(1);
        dets[1].class = DetectionClass::Vehicle;
        let mut cm = ConfusionMatrix::default();
        cm.tally(&f, &dets, 0.5);
        assert_eq!(
            cm.classes[&DetectionClass::Vehicle],
            ClassCounts { tp: 1, fp: 1, fn_: 1 }
        );
        assert_eq!(
            cm.classes[&DetectionClass::Person],
            ClassCounts { tp: 0, fp: 0, fn_: 1 }
        );
    }
}
