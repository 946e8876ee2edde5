use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::quantity::{parse_quantity, QuantityKind};
use super::simulator::ResourceSpec;
use super::DeployError;
use crate::config::{ConfigDocument, Node, Scalar};
use crate::validation::{resolve, ConfigPath};

const BUILTIN: &str = include_str!("../../data/system_profiles.yaml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceDefaults {
    pub replicas: u32,
    pub cpu: String,
    pub memory: String,
}

/// Where one system keeps its replica count and per-replica limits.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemProfile {
    pub replicas_path: ConfigPath,
    pub cpu_path: ConfigPath,
    pub memory_path: ConfigPath,
    pub defaults: ResourceDefaults,
}

#[derive(Debug, Clone, Default)]
pub struct SystemProfiles {
    profiles: BTreeMap<String, SystemProfile>,
}

impl SystemProfiles {
    /// Profiles shipped for dask, redis and ray.
    pub fn builtin() -> Self {
        Self::from_yaml_str(BUILTIN).expect("builtin system profiles parse")
    }

    pub fn from_yaml_str(text: &str) -> Result<Self, DeployError> {
        let profiles: BTreeMap<String, SystemProfile> =
            serde_yaml::from_str(text).map_err(|e| DeployError::ProfileFile(e.to_string()))?;
        Ok(Self { profiles })
    }

    pub fn load(path: &Path) -> Result<Self, DeployError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeployError::ProfileFile(format!("{}: {e}", path.display())))?;
        Self::from_yaml_str(&text)
    }

    /// Adds or replaces profiles from `other`.
    pub fn extend(&mut self, other: SystemProfiles) {
        self.profiles.extend(other.profiles);
    }

    pub fn get(&self, system: &str) -> Option<&SystemProfile> {
        self.profiles.get(system)
    }
}

fn scalar_text(node: &Node) -> Option<String> {
    match node.as_scalar()? {
        Scalar::Null => None,
        s => Some(s.to_plain_string()),
    }
}

/// Resource spec read from `config` via the system's path profile, plus one
/// warning line per value that fell back to a default.
pub fn extract_resources(
    config: &ConfigDocument,
    system: &str,
    profiles: &SystemProfiles,
) -> Result<(ResourceSpec, Vec<String>), DeployError> {
    let profile = profiles
        .get(system)
        .ok_or_else(|| DeployError::UnknownSystemProfile(system.to_string()))?;
    let mut notes = Vec::new();
    let mut read = |label: &str, path: &ConfigPath, default: String| -> String {
        match resolve(&config.root, path).first().and_then(|n| scalar_text(n)) {
            Some(text) => text,
            None => {
                notes.push(format!("WARN {label} not set at {path}; using default {default}"));
                default
            }
        }
    };
    let replicas_text = read("replicas", &profile.replicas_path, profile.defaults.replicas.to_string());
    let cpu_text = read("cpu", &profile.cpu_path, profile.defaults.cpu.clone());
    let memory_text = read("memory", &profile.memory_path, profile.defaults.memory.clone());

    let replicas: u32 = replicas_text
        .trim()
        .parse()
        .map_err(|_| DeployError::InvalidResource(format!("replicas {replicas_text:?} is not a whole number")))?;
    if replicas == 0 {
        return Err(DeployError::InvalidResource("replicas must be at least 1".into()));
    }
    let spec = ResourceSpec {
        cpu_millicores: parse_quantity(&cpu_text, QuantityKind::Cpu)?,
        memory_bytes: parse_quantity(&memory_text, QuantityKind::Memory)?,
        replicas,
    };
    Ok((spec, notes))
}
