use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::preprocess::parse_config;

/// One in-context example: the task, its intent, a correct configuration and
/// optionally an incorrect one with a note on what is wrong with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub prompt: String,
    pub intent: String,
    pub correct_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incorrect_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<String>,
}

impl FewShotExample {
    pub fn validate(&self) -> Result<(), PromptError> {
        parse_config(&self.correct_output)
            .map_err(|e| PromptError::InvalidShot(format!("correct_output does not parse: {e}")))?;
        if self.incorrect_output.is_some() && self.defect.as_deref().is_none_or(|d| d.trim().is_empty()) {
            return Err(PromptError::InvalidShot("incorrect_output needs a defect note".into()));
        }
        Ok(())
    }
}

/// Shots grouped by target system, loaded from `shots/<system>/<name>.yaml`.
#[derive(Debug, Clone, Default)]
pub struct ShotLibrary {
    by_system: BTreeMap<String, Vec<FewShotExample>>,
}

impl ShotLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, system: &str, shot: FewShotExample) -> Result<(), PromptError> {
        shot.validate()?;
        self.by_system.entry(system.to_string()).or_default().push(shot);
        Ok(())
    }

    pub fn shots_for(&self, system: &str) -> &[FewShotExample] {
        self.by_system.get(system).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn knows(&self, system: &str) -> bool {
        self.by_system.contains_key(system)
    }

    pub fn systems(&self) -> impl Iterator<Item = &str> {
        self.by_system.keys().map(String::as_str)
    }

    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        let io = |path: &Path, e: std::io::Error| PromptError::ShotLibrary(format!("{}: {e}", path.display()));
        let mut library = Self::new();
        let mut systems: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir())
            .map(|e| e.path())
            .collect();
        systems.sort();
        for system_dir in systems {
            let system = system_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let mut files: Vec<_> = std::fs::read_dir(&system_dir)
                .map_err(|e| io(&system_dir, e))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("yaml" | "yml")))
                .collect();
            files.sort();
            for file in files {
                let text = std::fs::read_to_string(&file).map_err(|e| io(&file, e))?;
                let shot: FewShotExample = serde_yaml::from_str(&text)
                    .map_err(|e| PromptError::ShotLibrary(format!("{}: {e}", file.display())))?;
                library
                    .add(&system, shot)
                    .map_err(|e| PromptError::ShotLibrary(format!("{}: {e}", file.display())))?;
            }
        }
        Ok(library)
    }
}
