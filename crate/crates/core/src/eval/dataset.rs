use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::DatasetError;
use crate::gateway::mock::MockScript;
use crate::prompt::GenerationRequest;
use crate::validation::Assertion;

pub const LEVELS: std::ops::RangeInclusive<u8> = 1..=6;

/// One dataset entry, stored as `<system>/level<k>/<id>.yaml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCase {
    pub id: String,
    pub system: String,
    pub level: u8,
    pub prompt: String,
    pub intent: String,
    pub assertions: Vec<Assertion>,
    #[serde(default, rename = "features", alias = "features_tested")]
    pub features_tested: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_context: Option<String>,
}

impl BenchmarkCase {
    pub fn request(&self) -> GenerationRequest {
        let mut request = GenerationRequest::new(&self.system, &self.prompt, &self.intent);
        request.resource_context = self.resource_context.clone();
        request
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if !LEVELS.contains(&self.level) {
            return Err(format!("level {} outside 1..=6", self.level));
        }
        if self.assertions.is_empty() {
            return Err("no assertions".into());
        }
        if self.prompt.trim().is_empty() || self.intent.trim().is_empty() {
            return Err("prompt and intent must be non-empty".into());
        }
        Ok(())
    }
}

fn is_mock_file(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    name.ends_with(".mock.yaml") || name.ends_with(".mock.yml")
}

fn is_yaml(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("yaml" | "yml"))
}

fn yaml_files(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::Io {
            path: root.to_path_buf(),
            detail: "not a readable directory".into(),
        });
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::Io {
            path: root.to_path_buf(),
            detail: e.to_string(),
        })?;
        if entry.file_type().is_file() && is_yaml(entry.path()) {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Directory level (`level3` → 3) when the case sits in one.
fn directory_level(path: &Path) -> Option<u8> {
    path.parent()?.file_name()?.to_str()?.strip_prefix("level")?.parse().ok()
}

pub fn load_case(path: &Path) -> Result<BenchmarkCase, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let case: BenchmarkCase = serde_yaml::from_str(&text).map_err(|e| DatasetError::Malformed {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    case.validate().map_err(|detail| DatasetError::Malformed {
        path: path.to_path_buf(),
        detail,
    })?;
    if let Some(level) = directory_level(path) {
        if level != case.level {
            return Err(DatasetError::Malformed {
                path: path.to_path_buf(),
                detail: format!("case declares level {} but lives in level{level}", case.level),
            });
        }
    }
    Ok(case)
}

/// Loads every case under `root`, sorted by (system, level, id).
pub fn load_dataset(root: &Path) -> Result<Vec<BenchmarkCase>, DatasetError> {
    let mut cases = Vec::new();
    let mut seen: HashMap<String, PathBuf> = HashMap::new();
    for path in yaml_files(root)?.into_iter().filter(|p| !is_mock_file(p)) {
        let case = load_case(&path)?;
        if let Some(first) = seen.insert(case.id.clone(), path.clone()) {
            return Err(DatasetError::DuplicateId {
                id: case.id,
                first,
                second: path,
            });
        }
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(DatasetError::Empty(root.to_path_buf()));
    }
    cases.sort_by(|a, b| (&a.system, a.level, &a.id).cmp(&(&b.system, b.level, &b.id)));
    Ok(cases)
}

/// Merges every `<id>.mock.yaml` under `root` into one script.
pub fn load_case_scripts(root: &Path) -> Result<MockScript, DatasetError> {
    let mut script = MockScript::default();
    for path in yaml_files(root)?.into_iter().filter(|p| is_mock_file(p)) {
        let part = MockScript::load(&path).map_err(|e| DatasetError::Malformed {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        script.merge(part);
    }
    Ok(script)
}
