use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::gateway::{HttpProviderConfig, SamplingParams};
use crate::prompt::ProfileName;
use crate::retrieval::{DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP, DEFAULT_TOP_K};

pub const DEFAULT_RATE_PER_TOKEN: f64 = 8.0e-7;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSettings {
    Mock {
        #[serde(default)]
        scripts: Vec<PathBuf>,
    },
    Http(HttpProviderConfig),
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings::Mock { scripts: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSettings {
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_chunk_size() -> usize {
    DEFAULT_CHUNK_SIZE
}
fn default_overlap() -> usize {
    DEFAULT_OVERLAP
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_OVERLAP,
            top_k: DEFAULT_TOP_K,
        }
    }
}

/// Settings file read via `--config` or `LADS_CONFIG`. Relative paths are
/// resolved against the file's directory.
///
/// ```yaml
/// provider: { kind: mock, scripts: [scripts/demo.mock.yaml] }
/// profile: LADS
/// dataset: dataset
/// shots: shots
/// docs: docs
/// cluster: cluster.yaml
/// output_dir: out
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub provider: ProviderSettings,
    #[serde(default)]
    pub profile: Option<ProfileName>,
    #[serde(default)]
    pub max_chain_attempts: Option<u32>,
    #[serde(default)]
    pub sampling: Option<SamplingParams>,
    #[serde(default)]
    pub deterministic: Option<bool>,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub docs: Option<PathBuf>,
    #[serde(default)]
    pub shots: Option<PathBuf>,
    #[serde(default)]
    pub cluster: Option<PathBuf>,
    #[serde(default)]
    pub system_profiles: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_rate")]
    pub rate_per_token: f64,
    #[serde(default)]
    pub retrieval: RetrievalSettings,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("lads-out")
}

fn default_rate() -> f64 {
    DEFAULT_RATE_PER_TOKEN
}

impl Default for AppConfig {
    fn default() -> Self {
        serde_yaml::from_str("{}").expect("empty config deserializes")
    }
}

impl AppConfig {
    pub fn from_yaml_str(text: &str, base: &Path) -> Result<Self, String> {
        let mut config: AppConfig = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_yaml_str(&text, base).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.dataset,
            &mut self.docs,
            &mut self.shots,
            &mut self.cluster,
            &mut self.system_profiles,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
        if let ProviderSettings::Mock { scripts } = &mut self.provider {
            scripts.iter_mut().for_each(fix);
        }
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<(), String> {
        let mut inputs: Vec<(&str, &PathBuf)> = [
            ("dataset", &self.dataset),
            ("docs", &self.docs),
            ("shots", &self.shots),
            ("cluster", &self.cluster),
            ("system_profiles", &self.system_profiles),
        ]
        .into_iter()
        .filter_map(|(name, p)| p.as_ref().map(|p| (name, p)))
        .collect();
        if let ProviderSettings::Mock { scripts } = &self.provider {
            inputs.extend(scripts.iter().map(|p| ("mock script", p)));
        }
        for (name, path) in inputs {
            if !path.exists() {
                return Err(format!("{name} path {} does not exist", path.display()));
            }
        }
        if !(self.rate_per_token > 0.0) {
            return Err(format!("rate_per_token must be positive, got {}", self.rate_per_token));
        }
        Ok(())
    }
}
