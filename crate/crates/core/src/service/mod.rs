//! Operational shell: service configuration, the file-backed run store and
//! the HTTP API.

mod http;
mod store;

pub use http::{router, serve, AppState, ServeError};
pub use store::{RunRecord, RunStatus, RunStore, StoreError};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{Camera, CameraConfig, CameraError};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Endpoints {
    /// Base URL of a detector exposing `POST /v1/detect`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<String>,
    /// Base URL of a model server exposing `POST /v1/chat`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_in_flight: usize,
    pub request_timeout_ms: u64,
    pub retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_in_flight: 4,
            request_timeout_ms: 30_000,
            retries: 2,
            backoff_base_ms: 100,
        }
    }
}

/// Service config file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub cameras: Vec<CameraConfig>,
    pub scenario_dir: PathBuf,
    pub store_root: PathBuf,
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default)]
    pub limits: Limits,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path} at `{field}`: {message}")]
    Invalid {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Camera(#[from] CameraError),
}

impl ServiceConfig {
    /// Config of the shipped demo: the four corpus cameras.
    pub fn demo() -> Self {
        ServiceConfig {
            cameras: crate::corpus::camera_configs(),
            scenario_dir: "scenarios".into(),
            store_root: "store".into(),
            endpoints: Endpoints::default(),
            limits: Limits::default(),
        }
    }

    /// Reads a config and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ServiceConfig = serde_json::from_str(&text).map_err(|e| {
            let field = e.to_string();
            let field = field.split(" at line").next().unwrap_or_default().to_owned();
            ConfigError::Invalid {
                path: path.to_path_buf(),
                field: format!("line {} column {}", e.line(), e.column()),
                message: field,
            }
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.scenario_dir);
        resolve(&mut config.store_root);
        for c in &mut config.cameras {
            resolve(&mut c.alias_db);
        }
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let invalid = |field: String, message: &str| ConfigError::Invalid {
            path: path.to_path_buf(),
            field,
            message: message.to_owned(),
        };
        if self.cameras.is_empty() {
            return Err(invalid("cameras".into(), "at least one camera is required"));
        }
        let mut ids = std::collections::HashSet::new();
        for (i, c) in self.cameras.iter().enumerate() {
            if !ids.insert(c.id.as_str()) {
                return Err(invalid(format!("cameras[{i}].id"), "duplicate camera id"));
            }
        }
        if self.limits.max_in_flight == 0 {
            return Err(invalid("limits.max_in_flight".into(), "must be >= 1"));
        }
        Ok(())
    }

    /// Loads every camera with its alias database.
    pub fn load_cameras(&self) -> Result<Vec<Camera>, ConfigError> {
        self.cameras
            .iter()
            .map(|c| Camera::load(c.clone(), Path::new("")).map_err(ConfigError::from))
            .collect()
    }
}
