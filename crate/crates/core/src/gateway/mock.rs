//! Scripted provider used for reproducible runs.
//!
//! Replies are looked up by `(scenario, attempt)` taken from the payload
//! metadata. When the payload names a profile, `"<scenario>@<profile>"` is
//! tried before the bare scenario. Unknown keys fall back to the default
//! reply, so lookup never fails.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::{ChatProvider, GatewayError, PromptPayload, RawResponse, SamplingParams};
use crate::retrieval::count_tokens;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub reply: String,
    pub latency_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MockScript {
    entries: HashMap<(String, u32), ScriptEntry>,
    pub default_reply: String,
    pub default_latency_seconds: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum EntrySpec {
    Text(String),
    Full {
        reply: String,
        #[serde(default)]
        latency_seconds: f64,
    },
}

impl From<EntrySpec> for ScriptEntry {
    fn from(spec: EntrySpec) -> Self {
        match spec {
            EntrySpec::Text(reply) => ScriptEntry {
                reply,
                latency_seconds: 0.0,
            },
            EntrySpec::Full {
                reply,
                latency_seconds,
            } => ScriptEntry {
                reply,
                latency_seconds,
            },
        }
    }
}

/// On-disk script layout.
///
/// ```yaml
/// scenario: dask-01          # defaults to the file stem
/// default_reply: "..."
/// attempts:                  # replies for scenario `dask-01`, attempt 1, 2, ...
///   - reply: "..."
///     latency_seconds: 4.2
/// verify:                    # replies for scenario `dask-01/verify`
///   - "VERDICT: ALIGNED"
/// scenarios:                 # any other scenario id
///   dask-01@LADS: ["..."]
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    default_reply: Option<String>,
    #[serde(default)]
    default_latency_seconds: Option<f64>,
    #[serde(default)]
    attempts: Vec<EntrySpec>,
    #[serde(default)]
    verify: Vec<EntrySpec>,
    #[serde(default)]
    scenarios: BTreeMap<String, Vec<EntrySpec>>,
}

pub fn verify_scenario(scenario: &str) -> String {
    format!("{scenario}/verify")
}

impl MockScript {
    pub fn new(default_reply: impl Into<String>) -> Self {
        Self {
            default_reply: default_reply.into(),
            ..Default::default()
        }
    }

    /// Registers replies for attempts `1..=replies.len()` of `scenario`.
    pub fn with_replies<I, S>(mut self, scenario: &str, replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for (i, reply) in replies.into_iter().enumerate() {
            self.insert(
                scenario,
                i as u32 + 1,
                ScriptEntry {
                    reply: reply.into(),
                    latency_seconds: 0.0,
                },
            );
        }
        self
    }

    pub fn insert(&mut self, scenario: &str, attempt: u32, entry: ScriptEntry) {
        self.entries.insert((scenario.to_string(), attempt), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds every entry of `other`; `other`'s default reply wins when set.
    pub fn merge(&mut self, other: MockScript) {
        self.entries.extend(other.entries);
        if !other.default_reply.is_empty() {
            self.default_reply = other.default_reply;
            self.default_latency_seconds = other.default_latency_seconds;
        }
    }

    pub fn get(&self, scenario: &str, attempt: u32) -> Option<&ScriptEntry> {
        self.entries.get(&(scenario.to_string(), attempt))
    }

    /// Total lookup: the scripted entry or the default reply.
    pub fn lookup(&self, scenario: &str, attempt: u32) -> ScriptEntry {
        self.get(scenario, attempt).cloned().unwrap_or_else(|| ScriptEntry {
            reply: self.default_reply.clone(),
            latency_seconds: self.default_latency_seconds,
        })
    }

    pub fn from_yaml_str(text: &str, default_scenario: &str) -> Result<Self, GatewayError> {
        let file: ScriptFile =
            serde_yaml::from_str(text).map_err(|e| GatewayError::Script(e.to_string()))?;
        Self::from_file_spec(file, default_scenario)
    }

    pub fn from_file_spec(file: ScriptFile, default_scenario: &str) -> Result<Self, GatewayError> {
        let base = file.scenario.unwrap_or_else(|| default_scenario.to_string());
        let mut script = MockScript {
            default_reply: file.default_reply.unwrap_or_default(),
            default_latency_seconds: file.default_latency_seconds.unwrap_or(0.0),
            ..Default::default()
        };
        let mut add = |scenario: &str, list: Vec<EntrySpec>| -> Result<(), GatewayError> {
            for (i, spec) in list.into_iter().enumerate() {
                let entry = ScriptEntry::from(spec);
                if !(entry.latency_seconds >= 0.0) {
                    return Err(GatewayError::Script(format!(
                        "negative latency for scenario {scenario} attempt {}",
                        i + 1
                    )));
                }
                script.insert(scenario, i as u32 + 1, entry);
            }
            Ok(())
        };
        add(&base, file.attempts)?;
        add(&verify_scenario(&base), file.verify)?;
        for (scenario, list) in file.scenarios {
            add(&scenario, list)?;
        }
        Ok(script)
    }

    /// Loads a script file. The default scenario id is the file name without
    /// `.mock.yaml` / `.yaml`.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))?;
        Self::from_yaml_str(&text, &scenario_from_path(path))
            .map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))
    }
}

pub fn scenario_from_path(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for suffix in [".mock.yaml", ".mock.yml", ".yaml", ".yml"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return stem.to_string();
        }
    }
    name
}

/// Provider backed by an immutable [`MockScript`].
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    script: MockScript,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn resolve(&self, payload: &PromptPayload) -> ScriptEntry {
        let meta = &payload.metadata;
        let scenario = meta
            .get("scenario")
            .or_else(|| meta.get("case_id"))
            .map(String::as_str)
            .unwrap_or("");
        let attempt = meta
            .get("attempt")
            .and_then(|a| a.parse().ok())
            .unwrap_or(1);
        if let Some(profile) = meta.get("profile") {
            if let Some(entry) = self.script.get(&format!("{scenario}@{profile}"), attempt) {
                return entry.clone();
            }
        }
        self.script.lookup(scenario, attempt)
    }
}

impl ChatProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn call(&self, payload: &PromptPayload, _params: &SamplingParams) -> Result<RawResponse, GatewayError> {
        let entry = self.resolve(payload);
        Ok(RawResponse {
            prompt_tokens: count_tokens(&payload.full_text()) as u64,
            completion_tokens: count_tokens(&entry.reply) as u64,
            text: entry.reply,
            latency_seconds: entry.latency_seconds,
        })
    }
}
