//! Multimodal-model responders.
//!
//! [`VlmClient`] talks to a real model server over `POST /v1/chat`; the
//! scripted oracle answers with the ground-truth caption after injecting
//! independent per-field errors. Both return answers in alias vocabulary and
//! ground them with the camera's alias table.

use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;
use tracing::debug;

use crate::camera::{Camera, Frame};
use crate::grounding::{
    describe_frame, substitute_aliases, AliasTable, CollisionStatement, Place, SceneDescription, SceneItem, SectionMap,
};
use crate::perception::frame_seed;
use crate::scene::DirectionLabel;

pub const DEFAULT_BACKOFF_BASE: Duration = Duration::from_millis(100);

#[derive(Debug, Clone)]
pub struct QueryRequest {
    pub request_id: u64,
    pub camera_id: String,
    pub tick: u64,
    pub prompt: String,
    /// Highlighted frame shown to the model.
    pub image: Arc<Frame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponderKind {
    Remote,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub request_id: u64,
    pub camera_id: String,
    pub tick: u64,
    /// Model answer in alias vocabulary.
    pub raw_text: String,
    /// `raw_text` with aliases replaced by real road names.
    pub grounded_text: String,
    pub responder: ResponderKind,
    pub latency_ms: f64,
    /// Transport retries spent before the reply arrived.
    pub retries: u32,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("model server {endpoint} timed out after {attempts} attempt(s)")]
    Timeout { endpoint: String, attempts: u32 },
    #[error("model server {endpoint} unreachable after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("model server {endpoint} returned HTTP {status}")]
    Status { endpoint: String, status: u16 },
    #[error("model server {endpoint} sent a malformed reply: {message}")]
    Malformed { endpoint: String, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub prompt: String,
    /// Base64 of the binary PPM (P6) encoding of the highlighted frame.
    pub image_b64: String,
    pub camera_id: String,
    pub tick: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct VlmClient {
    client: reqwest::Client,
    endpoint: String,
    timeout: Duration,
    retries: u32,
    backoff_base: Duration,
    in_flight: Arc<Semaphore>,
}

enum Attempt {
    Retryable(GatewayError),
    Fatal(GatewayError),
}

impl VlmClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: u32, max_in_flight: usize) -> Self {
        VlmClient {
            client: reqwest::Client::new(),
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            timeout,
            retries,
            backoff_base: DEFAULT_BACKOFF_BASE,
            in_flight: Arc::new(Semaphore::new(max_in_flight.max(1))),
        }
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Delay before retry number `n` (0-based): base · 2ⁿ, no jitter.
    pub fn backoff(&self, n: u32) -> Duration {
        self.backoff_base * 2u32.saturating_pow(n)
    }

    async fn attempt(&self, body: &ChatRequest, attempts: u32) -> Result<String, Attempt> {
        let endpoint = self.endpoint.clone();
        let response = self
            .client
            .post(format!("{}/v1/chat", self.endpoint))
            .timeout(self.timeout)
            .json(body)
            .send()
            .await;
        let transport = |e: reqwest::Error| {
            Attempt::Retryable(if e.is_timeout() {
                GatewayError::Timeout {
                    endpoint: endpoint.clone(),
                    attempts,
                }
            } else {
                GatewayError::Transport {
                    endpoint: endpoint.clone(),
                    attempts,
                    message: e.to_string(),
                }
            })
        };
        let response = response.map_err(transport)?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retryable(GatewayError::Transport {
                endpoint: endpoint.clone(),
                attempts,
                message: format!("HTTP {}", status.as_u16()),
            }));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(GatewayError::Status {
                endpoint: endpoint.clone(),
                status: status.as_u16(),
            }));
        }
        let bytes = response.bytes().await.map_err(transport)?;
        let reply: ChatReply = serde_json::from_slice(&bytes).map_err(|e| {
            Attempt::Fatal(GatewayError::Malformed {
                endpoint: endpoint.clone(),
                message: e.to_string(),
            })
        })?;
        Ok(reply.text)
    }

    /// Sends the prompt and image, retrying transport failures with
    /// exponential backoff, then grounds the reply with `table`.
    pub async fn query_remote(&self, req: &QueryRequest, table: &AliasTable) -> Result<QueryResponse, GatewayError> {
        if req.prompt.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
        let body = ChatRequest {
            prompt: req.prompt.clone(),
            image_b64: base64::engine::general_purpose::STANDARD.encode(req.image.image.to_ppm()),
            camera_id: req.camera_id.clone(),
            tick: req.tick,
        };
        let started = Instant::now();
        let mut retries = 0;
        loop {
            match self.attempt(&body, retries + 1).await {
                Ok(text) => {
                    return Ok(QueryResponse {
                        request_id: req.request_id,
                        camera_id: req.camera_id.clone(),
                        tick: req.tick,
                        grounded_text: substitute_aliases(&text, table),
                        raw_text: text,
                        responder: ResponderKind::Remote,
                        latency_ms: started.elapsed().as_secs_f64() * 1e3,
                        retries,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(e)) => {
                    if retries >= self.retries {
                        return Err(e);
                    }
                    debug!(endpoint = %self.endpoint, retry = retries + 1, error = %e, "retrying model request");
                    tokio::time::sleep(self.backoff(retries)).await;
                    retries += 1;
                }
            }
        }
    }
}

/// Independent per-field error probabilities for the scripted responder.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorRates {
    #[serde(default)]
    pub p_loc: f64,
    #[serde(default)]
    pub p_dir: f64,
    #[serde(default)]
    pub p_col: f64,
}

/// What the scripted responder changed in one answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InjectionTrace {
    pub vehicles: usize,
    pub locations_changed: usize,
    /// Location errors drawn but impossible (no other alias on the map).
    pub locations_unavailable: usize,
    pub directions_changed: usize,
    pub collision_flipped: bool,
}

/// Ground-truth description with injected errors. Each vehicle draws its
/// location and direction coin independently; the frame draws one
/// collision coin.
pub fn oracle_describe(
    truth: &Frame,
    map: &SectionMap,
    rates: ErrorRates,
    seed: u64,
) -> (SceneDescription, InjectionTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, &truth.camera_id, truth.tick));
    let mut desc = describe_frame(truth);
    let mut trace = InjectionTrace::default();
    let aliases: Vec<&str> = map.aliases().collect();
    for item in &mut desc.items {
        let SceneItem::Vehicle {
            number,
            place,
            direction,
        } = item
        else {
            continue;
        };
        trace.vehicles += 1;
        let (loc_coin, dir_coin) = (rng.random::<f64>(), rng.random::<f64>());
        if loc_coin < rates.p_loc {
            let current = place.alias();
            let others: Vec<&str> = aliases.iter().copied().filter(|a| Some(*a) != current).collect();
            match others.choose(&mut rng) {
                Some(a) => {
                    *place = Place::Section((*a).to_owned());
                    trace.locations_changed += 1;
                }
                None => {
                    debug!(camera = %truth.camera_id, vehicle = *number, "no alternative alias to inject");
                    trace.locations_unavailable += 1;
                }
            }
        }
        if dir_coin < rates.p_dir {
            let others: Vec<DirectionLabel> = DirectionLabel::MOVING.into_iter().filter(|d| d != direction).collect();
            *direction = *others.choose(&mut rng).expect("eight moving labels");
            trace.directions_changed += 1;
        }
    }
    if rng.random::<f64>() < rates.p_col {
        trace.collision_flipped = true;
        if desc.collisions.is_empty() {
            let places: Vec<&Place> = desc
                .items
                .iter()
                .filter_map(|i| match i {
                    SceneItem::Vehicle { place, .. } => Some(place),
                    SceneItem::Pedestrian { .. } => None,
                })
                .collect();
            let statement = match places.as_slice() {
                [first, _, ..] => CollisionStatement::Between {
                    first: 1,
                    second: 2,
                    place: (*first).clone(),
                },
                [only] => CollisionStatement::At { place: (*only).clone() },
                [] => CollisionStatement::At { place: Place::OffMap },
            };
            desc.collisions.push(statement);
        } else {
            desc.collisions.clear();
        }
    }
    (desc, trace)
}

/// Scripted stand-in for the fine-tuned model. `truth` is the
/// un-highlighted frame for the request's camera and tick.
pub fn oracle_respond(
    req: &QueryRequest,
    truth: &Frame,
    camera: &Camera,
    rates: ErrorRates,
    seed: u64,
) -> QueryResponse {
    let started = Instant::now();
    let (desc, _) = oracle_describe(truth, &camera.sections, rates, seed);
    let raw_text = desc.render();
    QueryResponse {
        request_id: req.request_id,
        camera_id: req.camera_id.clone(),
        tick: req.tick,
        grounded_text: substitute_aliases(&raw_text, &camera.aliases),
        raw_text,
        responder: ResponderKind::Oracle,
        latency_ms: started.elapsed().as_secs_f64() * 1e3,
        retries: 0,
    }
}

/// Either responder behind one call.
#[derive(Debug, Clone)]
pub enum Responder {
    Oracle { rates: ErrorRates, seed: u64 },
    Remote(VlmClient),
}

impl Responder {
    /// Scripted responders get their seed mixed with the scenario id, so
    /// scenarios that share camera ids and ticks draw independent errors.
    pub fn for_scenario(&self, scenario_id: &str) -> Responder {
        match self {
            Responder::Oracle { rates, seed } => Responder::Oracle {
                rates: *rates,
                seed: frame_seed(*seed, scenario_id, 0),
            },
            Responder::Remote(client) => Responder::Remote(client.clone()),
        }
    }

    pub async fn respond(
        &self,
        req: &QueryRequest,
        truth: &Frame,
        camera: &Camera,
    ) -> Result<QueryResponse, GatewayError> {
        match self {
            Responder::Oracle { rates, seed } => {
                if req.prompt.trim().is_empty() {
                    return Err(GatewayError::EmptyPrompt);
                }
                Ok(oracle_respond(req, truth, camera, *rates, *seed))
            }
            Responder::Remote(client) => client.query_remote(req, &camera.aliases).await,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{BBox, CameraConfig, EntityAnnotation};
    use crate::geometry::Vec2;
    use crate::grounding::{caption_frame, Section};
    use crate::raster::Image;
    use crate::scene::EntityKind;

    fn square(alias: &str, x: f64) -> Section {
        Section {
            alias: alias.into(),
            polygon: vec![
                Vec2::new(x, 0.0),
                Vec2::new(x + 10.0, 0.0),
                Vec2::new(x + 10.0, 10.0),
                Vec2::new(x, 10.0),
            ],
        }
    }

    fn camera(aliases: &[&str]) -> Camera {
        let sections = SectionMap {
            camera_id: "cam".into(),
            sections: aliases
                .iter()
                .enumerate()
                .map(|(i, a)| square(a, i as f64 * 10.0))
                .collect(),
        };
        let table = AliasTable {
            camera_id: "cam".into(),
            entries: aliases
                .iter()
                .enumerate()
                .map(|(i, a)| (a.to_string(), format!("Road {}", i + 1)))
                .collect(),
        };
        let config = CameraConfig {
            id: "cam".into(),
            origin: Vec2::new(0.0, 0.0),
            scale: 1.0,
            resolution: [32, 16],
            capture_period_ticks: 1,
            alias_db: "x".into(),
        };
        Camera::new(config, sections, table).unwrap()
    }

    fn truth(n: usize, alias: &str) -> Frame {
        let annotations = (0..n)
            .map(|i| EntityAnnotation {
                entity_id: format!("v{i}"),
                class: EntityKind::Vehicle,
                bbox: BBox::from([0.0, 0.0, 1.0, 1.0]),
                mask: vec![],
                section_alias: Some(alias.into()),
                direction: DirectionLabel::Upward,
                collided: false,
                collided_with: vec![],
            })
            .collect();
        Frame {
            camera_id: "cam".into(),
            tick: 4,
            image: Image::new(2, 2, [0, 0, 0]),
            annotations,
            collision_present: false,
        }
    }

    fn request(frame: &Frame) -> QueryRequest {
        QueryRequest {
            request_id: 1,
            camera_id: frame.camera_id.clone(),
            tick: frame.tick,
            prompt: "explain the vehicular activity".into(),
            image: Arc::new(frame.clone()),
        }
    }

    #[test]
    fn zero_rates_give_ground_truth() {
        let cam = camera(&["Section A", "Section B"]);
        let f = truth(2, "Section A");
        let r = oracle_respond(&request(&f), &f, &cam, ErrorRates::default(), 11);
        assert_eq!(r.raw_text, caption_frame(&f));
        assert_eq!(r.grounded_text, substitute_aliases(&r.raw_text, &cam.aliases));
        assert!(!r.grounded_text.contains("Section A"));
    }

    #[test]
    fn single_section_map_cannot_relocate() {
        let cam = camera(&["Section A"]);
        let f = truth(3, "Section A");
        let rates = ErrorRates {
            p_loc: 1.0,
            ..Default::default()
        };
        let (desc, trace) = oracle_describe(&f, &cam.sections, rates, 2);
        assert_eq!(desc.render(), caption_frame(&f));
        assert_eq!(trace.locations_unavailable, 3);
        assert_eq!(trace.locations_changed, 0);
    }

    #[test]
    fn certain_errors_change_every_field() {
        let cam = camera(&["Section A", "Section B", "Section C"]);
        let f = truth(4, "Section B");
        let rates = ErrorRates {
            p_loc: 1.0,
            p_dir: 1.0,
            p_col: 1.0,
        };
        let (desc, trace) = oracle_describe(&f, &cam.sections, rates, 3);
        assert_eq!((trace.locations_changed, trace.directions_changed), (4, 4));
        assert!(trace.collision_flipped);
        for item in &desc.items {
            let SceneItem::Vehicle { place, direction, .. } = item else {
                unreachable!()
            };
            assert_ne!(place, &Place::Section("Section B".into()));
            assert_ne!(*direction, DirectionLabel::Upward);
            assert_ne!(*direction, DirectionLabel::Stationary);
        }
        assert_eq!(desc.collisions.len(), 1);
    }

    #[test]
    fn oracle_is_deterministic_per_seed() {
        let cam = camera(&["Section A", "Section B", "Section C"]);
        let f = truth(6, "Section A");
        let rates = ErrorRates {
            p_loc: 0.5,
            p_dir: 0.5,
            p_col: 0.5,
        };
        let a = oracle_respond(&request(&f), &f, &cam, rates, 99);
        let b = oracle_respond(&request(&f), &f, &cam, rates, 99);
        assert_eq!(a.raw_text, b.raw_text);
    }

    #[test]
    fn backoff_doubles_from_base() {
        let c = VlmClient::new("http://127.0.0.1:9", Duration::from_millis(10), 3, 1);
        assert_eq!(c.backoff(0), Duration::from_millis(100));
        assert_eq!(c.backoff(1), Duration::from_millis(200));
        assert_eq!(c.backoff(2), Duration::from_millis(400));
    }

    #[test]
    fn scenario_scoping_changes_only_the_scripted_seed() {
        let rates = ErrorRates {
            p_loc: 0.5,
            ..ErrorRates::default()
        };
        let base = Responder::Oracle { rates, seed: 4 };
        let seed_of = |r: Responder| match r {
            Responder::Oracle { seed, rates: got } => {
                assert_eq!(got, rates);
                seed
            }
            Responder::Remote(_) => unreachable!(),
        };
        let (a, b) = (seed_of(base.for_scenario("s01")), seed_of(base.for_scenario("s02")));
        assert_ne!(a, b);
        assert_eq!(a, seed_of(base.for_scenario("s01")));

        let remote = Responder::Remote(VlmClient::new("http://127.0.0.1:9", Duration::from_secs(1), 0, 1));
        match remote.for_scenario("s01") {
            Responder::Remote(c) => assert_eq!(c.endpoint(), "http://127.0.0.1:9"),
            Responder::Oracle { .. } => panic!("remote responder became scripted"),
        }
    }
}
