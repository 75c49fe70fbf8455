//! Location aliases.
//!
//! Each camera splits its image into named polygonal sections ("Section A",
//! "the roundabout", ...). Captions and model answers speak only in those
//! generic aliases; a per-camera alias table turns them into real road names
//! after the fact.

mod caption;
mod substitute;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_non_degenerate, polygon_contains, Vec2};

pub use caption::{caption_frame, describe_frame, CollisionStatement, Place, SceneDescription, SceneItem};
pub use substitute::{find_alias_matches, substitute_aliases, AliasMatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub alias: String,
    /// Image-space outline in pixels.
    pub polygon: Vec<Vec2>,
}

/// Ordered sections of one camera view. Earlier sections win where polygons
/// overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMap {
    pub camera_id: String,
    pub sections: Vec<Section>,
}

impl SectionMap {
    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|s| s.alias.as_str())
    }
}

/// First section (in list order) containing `point`; boundaries count as inside.
pub fn section_of(map: &SectionMap, point: Vec2) -> Option<&str> {
    map.sections
        .iter()
        .find(|s| polygon_contains(&s.polygon, point))
        .map(|s| s.alias.as_str())
}

/// Alias → real road name for one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasTable {
    pub camera_id: String,
    pub entries: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn real_name(&self, alias: &str) -> Option<&str> {
        self.entries.get(alias).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AliasViolation {
    MissingAlias { alias: String },
    DuplicateAlias { alias: String },
    DegenerateSection { alias: String },
    EmptyEntry { alias: String },
    NameCollision { alias: String, real_name: String },
    CameraMismatch { map: String, table: String },
}

impl std::fmt::Display for AliasViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AliasViolation::MissingAlias { alias } => {
                write!(f, "section alias `{alias}` has no real-name entry")
            }
            AliasViolation::DuplicateAlias { alias } => write!(f, "alias `{alias}` is defined twice"),
            AliasViolation::DegenerateSection { alias } => {
                write!(f, "section `{alias}` has a degenerate polygon")
            }
            AliasViolation::EmptyEntry { alias } => {
                write!(f, "alias table entry `{alias}` has an empty alias or name")
            }
            AliasViolation::NameCollision { alias, real_name } => {
                write!(f, "real name `{real_name}` contains alias `{alias}`")
            }
            AliasViolation::CameraMismatch { map, table } => {
                write!(f, "section map camera `{map}` differs from table camera `{table}`")
            }
        }
    }
}

/// Checks that a section map and its alias table agree. Returns every
/// violation found; an empty list means the pair is usable.
pub fn validate_alias_table(map: &SectionMap, table: &AliasTable) -> Vec<AliasViolation> {
    let mut out = Vec::new();
    if map.camera_id != table.camera_id {
        out.push(AliasViolation::CameraMismatch {
            map: map.camera_id.clone(),
            table: table.camera_id.clone(),
        });
    }
    let mut seen = HashSet::new();
    for section in &map.sections {
        if !seen.insert(section.alias.to_lowercase()) {
            out.push(AliasViolation::DuplicateAlias {
                alias: section.alias.clone(),
            });
        }
        if !is_non_degenerate(&section.polygon) {
            out.push(AliasViolation::DegenerateSection {
                alias: section.alias.clone(),
            });
        }
        if !table.entries.contains_key(&section.alias) {
            out.push(AliasViolation::MissingAlias {
                alias: section.alias.clone(),
            });
        }
    }
    for (alias, name) in &table.entries {
        if alias.trim().is_empty() || name.trim().is_empty() {
            out.push(AliasViolation::EmptyEntry { alias: alias.clone() });
        }
    }
    let registered: Vec<&String> = table
        .entries
        .keys()
        .chain(map.sections.iter().map(|s| &s.alias))
        .collect();
    for name in table.entries.values() {
        let lowered = name.to_lowercase();
        let mut flagged = HashSet::new();
        for alias in &registered {
            if alias.is_empty() || !flagged.insert(alias.to_lowercase()) {
                continue;
            }
            if lowered.contains(&alias.to_lowercase()) {
                out.push(AliasViolation::NameCollision {
                    alias: (*alias).clone(),
                    real_name: name.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum AliasDbError {
    #[error("failed to read alias database {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed alias database {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("alias database {path} is inconsistent: {}", join(.violations))]
    Invalid {
        path: PathBuf,
        violations: Vec<AliasViolation>,
    },
}

fn join(v: &[AliasViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// On-disk form of one camera's sections plus its road-name table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasDb {
    pub camera_id: String,
    pub sections: Vec<Section>,
    pub names: BTreeMap<String, String>,
}

impl AliasDb {
    pub fn split(&self) -> (SectionMap, AliasTable) {
        (
            SectionMap {
                camera_id: self.camera_id.clone(),
                sections: self.sections.clone(),
            },
            AliasTable {
                camera_id: self.camera_id.clone(),
                entries: self.names.clone(),
            },
        )
    }

    pub fn from_parts(map: &SectionMap, table: &AliasTable) -> Self {
        AliasDb {
            camera_id: map.camera_id.clone(),
            sections: map.sections.clone(),
            names: table.entries.clone(),
        }
    }

    pub fn violations(&self) -> Vec<AliasViolation> {
        let (map, table) = self.split();
        validate_alias_table(&map, &table)
    }

    /// Reads and validates an alias database file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AliasDbError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AliasDbError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let db: AliasDb = serde_json::from_str(&text).map_err(|source| AliasDbError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let violations = db.violations();
        if !violations.is_empty() {
            return Err(AliasDbError::Invalid {
                path: path.to_path_buf(),
                violations,
            });
        }
        Ok(db)
    }
}
