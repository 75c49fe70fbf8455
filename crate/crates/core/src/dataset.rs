//! Instruction-tuning corpus: highlighted image + query + alias-phrased answer.
//!
//! Records are stored one per line in `dataset.jsonl` with a
//! `manifest.json` summary next to it. Images are referenced by path
//! relative to the dataset root.
//!
//! Mapping to conversation-style tuning layouts: `image_path` is the image
//! attachment, `query` the user turn, `answer` the assistant turn.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Frame;
use crate::grounding::caption_frame;
use crate::scene::{DirectionLabel, EntityKind};

pub const DEFAULT_QUERY: &str = "explain the vehicular activity";

/// Small query pool used when building corpora; the first entry is the
/// default.
pub const QUERY_POOL: [&str; 4] = [
    DEFAULT_QUERY,
    "Describe where each vehicle is and which way it is heading.",
    "Is there a collision in this camera view?",
    "Summarize the traffic situation in this image.",
];

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    Collision,
    Congestion,
    Platooning,
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub image_path: String,
    pub camera_id: String,
    pub tick: u64,
    pub query: String,
    pub answer: String,
    pub tags: BTreeSet<Tag>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("highlighted frame {found} does not belong to frame {expected}")]
    FrameMismatch { expected: String, found: String },
    #[error("record `{id}` references missing image {path}")]
    MissingImage { id: String, path: PathBuf },
    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Image location of a highlighted frame inside a dataset root.
pub fn image_path(scenario_id: &str, frame: &Frame) -> String {
    format!("frames/{scenario_id}/{}/{:08}.ppm", frame.camera_id, frame.tick)
}

/// Tags derived from the ground-truth annotations.
pub fn derive_tags(frame: &Frame) -> BTreeSet<Tag> {
    let mut tags = BTreeSet::new();
    if frame.collision_present {
        tags.insert(Tag::Collision);
    }
    if frame.annotations.iter().any(|a| a.class == EntityKind::Pedestrian) {
        tags.insert(Tag::Pedestrian);
    }
    let mut per_section: HashMap<&str, usize> = HashMap::new();
    let mut per_lane: HashMap<(&str, DirectionLabel), usize> = HashMap::new();
    for v in frame.vehicles() {
        let Some(section) = v.section_alias.as_deref() else {
            continue;
        };
        *per_section.entry(section).or_default() += 1;
        if v.direction != DirectionLabel::Stationary {
            *per_lane.entry((section, v.direction)).or_default() += 1;
        }
    }
    if per_section.values().any(|&n| n >= 3) {
        tags.insert(Tag::Congestion);
    }
    if per_lane.values().any(|&n| n >= 2) {
        tags.insert(Tag::Platooning);
    }
    tags
}

pub fn build_record(
    scenario_id: &str,
    frame: &Frame,
    highlighted: &Frame,
    query: &str,
) -> Result<InstructionRecord, DatasetError> {
    if frame.camera_id != highlighted.camera_id || frame.tick != highlighted.tick {
        return Err(DatasetError::FrameMismatch {
            expected: format!("{}@{}", frame.camera_id, frame.tick),
            found: format!("{}@{}", highlighted.camera_id, highlighted.tick),
        });
    }
    Ok(InstructionRecord {
        id: format!("{scenario_id}/{}/{:08}", frame.camera_id, frame.tick),
        image_path: image_path(scenario_id, highlighted),
        camera_id: frame.camera_id.clone(),
        tick: frame.tick,
        query: query.to_owned(),
        answer: caption_frame(frame),
        tags: derive_tags(frame),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub count: usize,
    pub collision_count: usize,
    pub cameras: Vec<String>,
    pub created_at: String,
}

impl Manifest {
    pub fn summarize(records: &[InstructionRecord], created_at: &str) -> Manifest {
        let cameras: BTreeSet<&str> = records.iter().map(|r| r.camera_id.as_str()).collect();
        Manifest {
            count: records.len(),
            collision_count: records.iter().filter(|r| r.tags.contains(&Tag::Collision)).count(),
            cameras: cameras.into_iter().map(str::to_owned).collect(),
            created_at: created_at.to_owned(),
        }
    }
}

fn check_images(records: &[InstructionRecord], root: &Path) -> Result<(), DatasetError> {
    for r in records {
        let path = root.join(&r.image_path);
        if !path.is_file() {
            return Err(DatasetError::MissingImage { id: r.id.clone(), path });
        }
    }
    Ok(())
}

/// Serializes records to JSON lines, one record per line, fields in
/// declaration order.
pub fn to_jsonl(records: &[InstructionRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records always serialize");
        out.push(b'\n');
    }
    out
}

/// Writes `dataset.jsonl` and `manifest.json` under `root`. Every referenced
/// image must already exist there.
pub fn export_dataset(records: &[InstructionRecord], root: &Path, created_at: &str) -> Result<Manifest, DatasetError> {
    check_images(records, root)?;
    std::fs::create_dir_all(root).map_err(io_err(root))?;
    let data_path = root.join(DATASET_FILE);
    let mut file = std::fs::File::create(&data_path).map_err(io_err(&data_path))?;
    file.write_all(&to_jsonl(records)).map_err(io_err(&data_path))?;
    let manifest = Manifest::summarize(records, created_at);
    let manifest_path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

pub fn import_dataset(root: &Path) -> Result<Vec<InstructionRecord>, DatasetError> {
    let path = root.join(DATASET_FILE);
    let file = std::fs::File::open(&path).map_err(io_err(&path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InstructionRecord = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedLine {
            path: path.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    check_images(&records, root)?;
    Ok(records)
}

pub fn read_manifest(root: &Path) -> Result<Manifest, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::MalformedLine {
        path,
        line: e.line(),
        message: e.to_string(),
    })
}

/// Seeded shuffle split; `train_ratio` of the records (rounded down) go to
/// the first half.
pub fn split_records(
    records: &[InstructionRecord],
    train_ratio: f64,
    seed: u64,
) -> (Vec<InstructionRecord>, Vec<InstructionRecord>) {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((records.len() as f64) * train_ratio.clamp(0.0, 1.0)).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    (pick(&order[..cut]), pick(&order[cut..]))
}
