use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REGISTRY_FILE: &str = "registry.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

/// One registry line. The latest line for an id is its current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub kind: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run store io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt registry line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("run `{0}` not found")]
    NotFound(String),
    #[error("run `{0}` is finished and cannot change")]
    Immutable(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Directory-per-run artifact store with an append-only registry.
///
/// Artifacts are written into `runs/{id}.tmp/` and renamed to `runs/{id}/`
/// only when the run finishes, so a failed run never leaves a partial tree
/// under a done id.
#[derive(Debug)]
pub struct RunStore {
    root: PathBuf,
    // serializes registry appends and id allocation
    registry: Mutex<()>,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let runs = root.join("runs");
        std::fs::create_dir_all(&runs).map_err(io(&runs))?;
        Ok(RunStore {
            root,
            registry: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn registry_path(&self) -> PathBuf {
        self.root.join(REGISTRY_FILE)
    }

    fn read_all(&self) -> Result<Vec<RunRecord>, StoreError> {
        let path = self.registry_path();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
            Err(e) => return Err(io(&path)(e)),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    fn append(&self, record: &RunRecord) -> Result<(), StoreError> {
        let path = self.registry_path();
        let mut line = serde_json::to_vec(record).expect("run records serialize");
        line.push(b'\n');
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io(&path))?;
        file.write_all(&line).map_err(io(&path))?;
        file.sync_data().map_err(io(&path))
    }

    /// Current state of every run, in creation order.
    pub fn list(&self) -> Result<Vec<RunRecord>, StoreError> {
        let _guard = self.registry.lock().expect("registry lock poisoned");
        let mut latest: Vec<RunRecord> = Vec::new();
        for r in self.read_all()? {
            match latest.iter_mut().find(|x| x.id == r.id) {
                Some(slot) => *slot = r,
                None => latest.push(r),
            }
        }
        Ok(latest)
    }

    pub fn get(&self, id: &str) -> Result<RunRecord, StoreError> {
        self.list()?
            .into_iter()
            .find(|r| r.id == id)
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))
    }

    /// Registers a new pending run with a fresh id `{kind}-{n:04}` and
    /// returns its staging directory.
    pub fn create(&self, kind: &str, scenario_id: Option<&str>) -> Result<(RunRecord, PathBuf), StoreError> {
        let _guard = self.registry.lock().expect("registry lock poisoned");
        let count = self
            .read_all()?
            .iter()
            .map(|r| r.id.as_str())
            .collect::<std::collections::HashSet<_>>()
            .len();
        let record = RunRecord {
            id: format!("{kind}-{:04}", count + 1),
            kind: kind.to_owned(),
            status: RunStatus::Pending,
            scenario_id: scenario_id.map(str::to_owned),
            error: None,
        };
        let staging = self.staging_dir(&record.id);
        std::fs::create_dir_all(&staging).map_err(io(&staging))?;
        self.append(&record)?;
        Ok((record, staging))
    }

    fn staging_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}.tmp"))
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    fn transition(&self, id: &str, status: RunStatus, error: Option<String>) -> Result<RunRecord, StoreError> {
        let mut record = self.get(id)?;
        if matches!(record.status, RunStatus::Done | RunStatus::Failed) {
            return Err(StoreError::Immutable(id.to_owned()));
        }
        let _guard = self.registry.lock().expect("registry lock poisoned");
        record.status = status;
        record.error = error;
        self.append(&record)?;
        Ok(record)
    }

    pub fn mark_running(&self, id: &str) -> Result<RunRecord, StoreError> {
        self.transition(id, RunStatus::Running, None)
    }

    /// Publishes the staging directory and marks the run done.
    pub fn finish(&self, id: &str) -> Result<RunRecord, StoreError> {
        let staging = self.staging_dir(id);
        let final_dir = self.run_dir(id);
        std::fs::rename(&staging, &final_dir).map_err(io(&final_dir))?;
        self.transition(id, RunStatus::Done, None)
    }

    /// Discards the staging directory and marks the run failed.
    pub fn fail(&self, id: &str, error: &str) -> Result<RunRecord, StoreError> {
        let staging = self.staging_dir(id);
        let _ = std::fs::remove_dir_all(&staging);
        self.transition(id, RunStatus::Failed, Some(error.to_owned()))
    }

    /// Reads an artifact of a done run.
    pub fn read_artifact(&self, id: &str, rel: &str) -> Result<Vec<u8>, StoreError> {
        let record = self.get(id)?;
        if record.status != RunStatus::Done {
            return Err(StoreError::NotFound(format!("{id}/{rel}")));
        }
        let path = self.run_dir(id).join(rel);
        std::fs::read(&path).map_err(io(&path))
    }
}
