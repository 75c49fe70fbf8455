//! Throwaway copies of the shipped corpus for tests that write files.

use std::path::{Path, PathBuf};

use tempfile::TempDir;

/// Temp directory holding `demo.json`, every alias table and the named
/// scenarios (all of them when `scenarios` is empty).
pub fn corpus_copy(scenarios: &[&str]) -> TempDir {
    let dir = tempfile::tempdir().expect("temp dir");
    for (rel, bytes) in trafficmon::corpus::corpus_files() {
        let keep = match rel.parent().and_then(Path::file_name).and_then(|d| d.to_str()) {
            Some("scenarios") => {
                let stem = rel.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                scenarios.is_empty() || scenarios.contains(&stem)
            }
            _ => true,
        };
        if keep {
            let path = dir.path().join(&rel);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, bytes).unwrap();
        }
    }
    dir
}

pub fn config_path(dir: &TempDir) -> PathBuf {
    dir.path().join("demo.json")
}
