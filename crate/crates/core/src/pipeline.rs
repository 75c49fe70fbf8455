//! End-to-end flows over scenarios: simulate and capture, highlight, export
//! the instruction-tuning corpus, and evaluate a responder.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::task::JoinSet;
use tracing::info;

use crate::camera::{capture_stream, frame_path, Camera, Frame};
use crate::dataset::{
    build_record, image_path, to_jsonl, DatasetError, InstructionRecord, Manifest, DATASET_FILE, DEFAULT_QUERY,
    MANIFEST_FILE,
};
use crate::eval::{aggregate, parse_response, score_frame, EvalError, EvalReport, FrameScore};
use crate::gateway::{GatewayError, QueryRequest, Responder};
use crate::perception::{oracle_detect, overlay_highlight, static_regions, Corruption};
use crate::scene::{run_scenario, ScenarioConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no camera `{0}` configured")]
    UnknownCamera(String),
    #[error("background task failed: {0}")]
    Task(String),
}

/// Destination for build artifacts, addressed by relative path.
pub trait ArtifactSink: Sync {
    fn put(&self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError>;
}

/// Writes artifacts below a root directory.
pub struct DirSink {
    pub root: PathBuf,
}

impl DirSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirSink { root: root.into() }
    }
}

impl ArtifactSink for DirSink {
    fn put(&self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        let write = |path: &Path| -> std::io::Result<()> {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)
        };
        write(&path).map_err(|source| PipelineError::Io { path, source })
    }
}

/// Keeps only a SHA-256 digest per artifact; for reproducibility checks.
#[derive(Default)]
pub struct HashSink {
    digests: Mutex<BTreeMap<String, String>>,
}

impl HashSink {
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.digests.lock().expect("hash sink poisoned").clone()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ArtifactSink for HashSink {
    fn put(&self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        self.digests
            .lock()
            .expect("hash sink poisoned")
            .insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }
}

/// Knobs of the oracle detector used to highlight frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HighlightOptions {
    #[serde(default)]
    pub corruption: Corruption,
    #[serde(default)]
    pub seed: u64,
}

/// One captured view: ground truth plus its highlighted copy.
#[derive(Debug, Clone)]
pub struct CapturedFrame {
    pub scenario_id: String,
    pub camera_index: usize,
    pub truth: Frame,
    pub highlighted: Frame,
}

/// Runs one scenario and captures every camera, camera by camera in tick
/// order. `visit` sees each frame as soon as it is rendered so callers never
/// need the whole run in memory.
pub fn capture_scenario(
    config: &ScenarioConfig,
    cameras: &[Camera],
    highlight: HighlightOptions,
    mut visit: impl FnMut(CapturedFrame) -> Result<(), PipelineError>,
) -> Result<(), PipelineError> {
    let run = run_scenario(config);
    for (camera_index, camera) in cameras.iter().enumerate() {
        let regions = static_regions(camera, &config.statics);
        for truth in capture_stream(camera, &run) {
            let detections = oracle_detect(&truth, highlight.corruption, highlight.seed ^ config.seed);
            let highlighted = overlay_highlight(&truth, &detections, &regions);
            visit(CapturedFrame {
                scenario_id: config.id.clone(),
                camera_index,
                truth,
                highlighted,
            })?;
        }
    }
    Ok(())
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

/// Calls `job` on every scenario across a pool of threads and returns the
/// results in scenario order.
fn par_map<T: Send>(
    scenarios: &[ScenarioConfig],
    job: impl Fn(&ScenarioConfig) -> Result<T, PipelineError> + Sync,
) -> Result<Vec<T>, PipelineError> {
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<Result<T, PipelineError>>>> = scenarios.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers().min(scenarios.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("work counter poisoned");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(config) = scenarios.get(i) else { break };
                *slots[i].lock().expect("result slot poisoned") = Some(job(config));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("result slot poisoned")
                .expect("every scenario ran")
        })
        .collect()
}

/// Writes raw frames and annotation sidecars as
/// `{scenario}/{camera}/{tick:08}.{ppm,json}`.
pub fn simulate(
    scenarios: &[ScenarioConfig],
    cameras: &[Camera],
    sink: &dyn ArtifactSink,
) -> Result<usize, PipelineError> {
    let counts = par_map(scenarios, |config| {
        let mut n = 0;
        capture_scenario(config, cameras, HighlightOptions::default(), |f| {
            let dir = Path::new(&f.scenario_id);
            let ppm = dir.join(frame_path(&f.truth.camera_id, f.truth.tick, "ppm"));
            let json = dir.join(frame_path(&f.truth.camera_id, f.truth.tick, "json"));
            sink.put(&slash(&ppm), &f.truth.image.to_ppm())?;
            let sidecar = serde_json::to_vec_pretty(&f.truth.sidecar()).expect("sidecar serializes");
            sink.put(&slash(&json), &sidecar)?;
            n += 1;
            Ok(())
        })?;
        info!(scenario = %config.id, frames = n, "simulated");
        Ok(n)
    })?;
    Ok(counts.into_iter().sum())
}

fn slash(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub highlight: HighlightOptions,
    /// Queries assigned round-robin over records in build order.
    pub queries: Vec<String>,
    pub created_at: String,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            highlight: HighlightOptions::default(),
            queries: vec![DEFAULT_QUERY.to_owned()],
            created_at: "1970-01-01T00:00:00Z".to_owned(),
        }
    }
}

/// Builds the instruction-tuning corpus: highlighted frames under
/// `frames/`, then `dataset.jsonl` and `manifest.json`.
pub fn export_corpus(
    scenarios: &[ScenarioConfig],
    cameras: &[Camera],
    options: &BuildOptions,
    sink: &dyn ArtifactSink,
) -> Result<(Vec<InstructionRecord>, Manifest), PipelineError> {
    let per_scenario = par_map(scenarios, |config| {
        let mut records = Vec::new();
        capture_scenario(config, cameras, options.highlight, |f| {
            sink.put(
                &image_path(&f.scenario_id, &f.highlighted),
                &f.highlighted.image.to_ppm(),
            )?;
            records.push(build_record(&f.scenario_id, &f.truth, &f.highlighted, DEFAULT_QUERY)?);
            Ok(())
        })?;
        Ok(records)
    })?;
    let mut records: Vec<InstructionRecord> = per_scenario.into_iter().flatten().collect();
    if !options.queries.is_empty() {
        for (i, r) in records.iter_mut().enumerate() {
            r.query = options.queries[i % options.queries.len()].clone();
        }
    }
    sink.put(DATASET_FILE, &to_jsonl(&records))?;
    let manifest = Manifest::summarize(&records, &options.created_at);
    let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    text.push(b'\n');
    sink.put(MANIFEST_FILE, &text)?;
    info!(records = records.len(), "corpus exported");
    Ok((records, manifest))
}

/// Runs `responder` on every captured frame and scores its answers.
/// Scenarios are rendered on blocking threads; queries for one scenario are
/// issued concurrently.
pub async fn evaluate(
    scenarios: &[ScenarioConfig],
    cameras: Arc<Vec<Camera>>,
    responder: Arc<Responder>,
    highlight: HighlightOptions,
    prompt: &str,
) -> Result<EvalReport, PipelineError> {
    let mut scores: Vec<FrameScore> = Vec::new();
    let limit = workers();
    let mut pending = scenarios.iter().cloned();
    let mut tasks: JoinSet<Result<Vec<FrameScore>, PipelineError>> = JoinSet::new();
    loop {
        while tasks.len() < limit {
            let Some(config) = pending.next() else { break };
            let cameras = cameras.clone();
            let responder = responder.clone();
            let prompt = prompt.to_owned();
            tasks.spawn(async move { evaluate_scenario(config, cameras, responder, highlight, prompt).await });
        }
        match tasks.join_next().await {
            Some(joined) => scores.extend(joined.map_err(|e| PipelineError::Task(e.to_string()))??),
            None => break,
        }
    }
    scores.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(aggregate(scores)?)
}

async fn evaluate_scenario(
    config: ScenarioConfig,
    cameras: Arc<Vec<Camera>>,
    responder: Arc<Responder>,
    highlight: HighlightOptions,
    prompt: String,
) -> Result<Vec<FrameScore>, PipelineError> {
    let render_cameras = cameras.clone();
    let frames = tokio::task::spawn_blocking(move || {
        let mut frames = Vec::new();
        capture_scenario(&config, &render_cameras, highlight, |f| {
            frames.push(f);
            Ok(())
        })
        .map(|_| frames)
    })
    .await
    .map_err(|e| PipelineError::Task(e.to_string()))??;

    score_captured(frames, &cameras, &responder, &prompt).await
}

/// Queries `responder` for each captured frame and scores the answers.
/// Ledger ids are `{scenario}/{camera}/{tick:08}`.
pub async fn score_captured(
    frames: Vec<CapturedFrame>,
    cameras: &[Camera],
    responder: &Responder,
    prompt: &str,
) -> Result<Vec<FrameScore>, PipelineError> {
    let mut out = Vec::with_capacity(frames.len());
    for (i, f) in frames.into_iter().enumerate() {
        let camera = &cameras[f.camera_index];
        let request = QueryRequest {
            request_id: i as u64,
            camera_id: f.truth.camera_id.clone(),
            tick: f.truth.tick,
            prompt: prompt.to_owned(),
            image: Arc::new(f.highlighted),
        };
        let response = responder
            .for_scenario(&f.scenario_id)
            .respond(&request, &f.truth, camera)
            .await?;
        let parsed = parse_response(&response.raw_text, &camera.sections);
        let mut score = score_frame(&parsed, &f.truth);
        score.id = format!("{}/{}", f.scenario_id, score.id);
        score.response = response.raw_text;
        out.push(score);
    }
    Ok(out)
}

/// Reloads frames written by [`simulate`] for one scenario and highlights
/// them again with the oracle detector.
pub fn load_simulated(
    root: &Path,
    config: &ScenarioConfig,
    cameras: &[Camera],
    highlight: HighlightOptions,
) -> Result<Vec<CapturedFrame>, PipelineError> {
    let read_err = |path: &Path, message: String| PipelineError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, message),
    };
    let mut out = Vec::new();
    for (camera_index, camera) in cameras.iter().enumerate() {
        let dir = root.join(&config.id).join(camera.id());
        let Ok(entries) = std::fs::read_dir(&dir) else { continue };
        let mut sidecars: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        sidecars.sort();
        let regions = static_regions(camera, &config.statics);
        for json in sidecars {
            let text = std::fs::read(&json).map_err(|e| read_err(&json, e.to_string()))?;
            let sidecar: crate::camera::FrameSidecar =
                serde_json::from_slice(&text).map_err(|e| read_err(&json, e.to_string()))?;
            let ppm = json.with_extension("ppm");
            let bytes = std::fs::read(&ppm).map_err(|e| read_err(&ppm, e.to_string()))?;
            let image = crate::raster::Image::from_ppm(&bytes).map_err(|e| read_err(&ppm, e.to_string()))?;
            let truth = Frame::from_parts(sidecar, image);
            let detections = oracle_detect(&truth, highlight.corruption, highlight.seed ^ config.seed);
            let highlighted = overlay_highlight(&truth, &detections, &regions);
            out.push(CapturedFrame {
                scenario_id: config.id.clone(),
                camera_index,
                truth,
                highlighted,
            });
        }
    }
    Ok(out)
}
