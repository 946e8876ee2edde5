//! Prompt assembly for each optimization profile.
//!
//! Sections are always emitted in the same order: instruction header,
//! retrieved context, few-shot examples, user intent, task prompt and the
//! step-by-step suffix. Disabled techniques simply leave their section out.

mod shots;
pub mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use shots::{FewShotExample, ShotLibrary};
use templates::*;

use crate::config::ConfigDocument;
use crate::gateway::{complete, ChatProvider, GatewayError, PromptPayload, RawResponse, SamplingParams};

pub const DEFAULT_MAX_CHAIN_ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("profile violation: {0}")]
    ProfileViolation(String),
    #[error("invalid few-shot example: {0}")]
    InvalidShot(String),
    #[error("shot library: {0}")]
    ShotLibrary(String),
    #[error("unknown profile {0:?} (expected IP, CoT, RAG, FSL or LADS)")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProfileName {
    #[serde(rename = "IP")]
    Ip,
    #[serde(rename = "CoT")]
    Cot,
    #[serde(rename = "RAG")]
    Rag,
    #[serde(rename = "FSL")]
    Fsl,
    #[serde(rename = "LADS")]
    Lads,
}

impl ProfileName {
    pub const ALL: [ProfileName; 5] = [
        ProfileName::Ip,
        ProfileName::Cot,
        ProfileName::Rag,
        ProfileName::Fsl,
        ProfileName::Lads,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::Ip => "IP",
            ProfileName::Cot => "CoT",
            ProfileName::Rag => "RAG",
            ProfileName::Fsl => "FSL",
            ProfileName::Lads => "LADS",
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileName::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PromptError::UnknownProfile(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProfile {
    pub name: ProfileName,
    pub use_instruction_header: bool,
    pub use_cot: bool,
    pub use_retrieval: bool,
    pub use_few_shot: bool,
    pub sampling: SamplingParams,
    /// Clamp temperature and top_p before every call.
    pub deterministic: bool,
    pub max_chain_attempts: u32,
}

impl OptimizationProfile {
    pub fn preset(name: ProfileName) -> Self {
        let (cot, retrieval, few_shot) = match name {
            ProfileName::Ip => (false, false, false),
            ProfileName::Cot => (true, false, false),
            ProfileName::Rag => (false, true, false),
            ProfileName::Fsl => (false, false, true),
            ProfileName::Lads => (true, true, true),
        };
        Self {
            name,
            use_instruction_header: true,
            use_cot: cot,
            use_retrieval: retrieval,
            use_few_shot: few_shot,
            sampling: SamplingParams::default(),
            deterministic: true,
            max_chain_attempts: DEFAULT_MAX_CHAIN_ATTEMPTS,
        }
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_chain_attempts = attempts;
        self
    }

    pub fn with_sampling(mut self, sampling: SamplingParams) -> Self {
        self.sampling = sampling;
        self
    }

    /// The flag set must be the one the name implies.
    pub fn validate(&self) -> Result<(), PromptError> {
        let preset = Self::preset(self.name);
        let flags = |p: &Self| (p.use_instruction_header, p.use_cot, p.use_retrieval, p.use_few_shot);
        if flags(self) != flags(&preset) {
            return Err(PromptError::ProfileViolation(format!(
                "technique flags do not match profile {}",
                self.name
            )));
        }
        if self.max_chain_attempts == 0 {
            return Err(PromptError::ProfileViolation("max_chain_attempts must be positive".into()));
        }
        self.sampling
            .validate()
            .map_err(|e| PromptError::ProfileViolation(e.to_string()))
    }

    pub fn effective_sampling(&self) -> SamplingParams {
        if self.deterministic {
            self.sampling.clamp_for_determinism()
        } else {
            self.sampling
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system: String,
    pub prompt: String,
    pub intent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_context: Option<String>,
    /// Set when the system has no shots on purpose.
    #[serde(default)]
    pub unseen_system: bool,
}

impl GenerationRequest {
    pub fn new(system: &str, prompt: &str, intent: &str) -> Self {
        Self {
            system: system.to_string(),
            prompt: prompt.to_string(),
            intent: intent.to_string(),
            resource_context: None,
            unseen_system: false,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.prompt.trim().is_empty() || self.intent.trim().is_empty() {
            return Err(PromptError::ProfileViolation("prompt and intent must be non-empty".into()));
        }
        Ok(())
    }
}

/// Labeled chunk as it appears in the context section.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextChunk {
    pub label: String,
    pub text: String,
}

impl From<&crate::retrieval::Chunk> for ContextChunk {
    fn from(c: &crate::retrieval::Chunk) -> Self {
        Self {
            label: format!("{} #{}", c.doc_id, c.ordinal),
            text: c.text.clone(),
        }
    }
}

pub fn build_cot_suffix() -> String {
    format!(
        "{COT_PHRASE}\nCheck the configuration against the user intent, the task and the examples before answering.\n{VERDICT_INSTRUCTION}"
    )
}

fn render_yaml_block(text: &str) -> String {
    format!("```yaml\n{}\n```", text.trim_end_matches('\n'))
}

fn render_examples(shots: &[FewShotExample]) -> String {
    let mut parts = Vec::new();
    let mut n = 0;
    for shot in shots {
        n += 1;
        parts.push(format!(
            "Example {n} (correct)\nPrompt: {}\nIntent: {}\nOutput:\n{}",
            shot.prompt,
            shot.intent,
            render_yaml_block(&shot.correct_output)
        ));
    }
    for shot in shots {
        if let Some(bad) = &shot.incorrect_output {
            n += 1;
            parts.push(format!(
                "Example {n} (incorrect: {})\nPrompt: {}\nIntent: {}\nOutput:\n{}",
                shot.defect.as_deref().unwrap_or_default(),
                shot.prompt,
                shot.intent,
                render_yaml_block(bad)
            ));
        }
    }
    parts.join("\n\n")
}

fn render_context(chunks: &[ContextChunk]) -> String {
    if chunks.is_empty() {
        return NO_CONTEXT.to_string();
    }
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| format!("[chunk {} | {}]\n{}\n[end chunk {}]", i + 1, c.label, c.text, i + 1))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn render_task(request: &GenerationRequest) -> String {
    match &request.resource_context {
        Some(ctx) if !ctx.trim().is_empty() => format!("{}\nCluster resources: {}", request.prompt, ctx.trim()),
        _ => request.prompt.clone(),
    }
}

/// Assembles the generation prompt for `profile`.
pub fn build_prompt(
    profile: &OptimizationProfile,
    request: &GenerationRequest,
    shots: &[FewShotExample],
    context_chunks: &[ContextChunk],
) -> Result<PromptPayload, PromptError> {
    request.validate()?;
    if profile.use_few_shot && shots.is_empty() {
        return Err(PromptError::ProfileViolation(format!(
            "profile {} needs few-shot examples for system {:?}",
            profile.name, request.system
        )));
    }

    let mut sections = Vec::new();
    if profile.use_retrieval {
        sections.push(format!("{CONTEXT_HEADING}\n{}", render_context(context_chunks)));
    }
    if profile.use_few_shot {
        sections.push(format!("{EXAMPLES_HEADING}\n{}", render_examples(shots)));
    }
    sections.push(format!("{INTENT_HEADING}\n{}", request.intent));
    sections.push(format!("{TASK_HEADING}\n{}", render_task(request)));
    if profile.use_cot {
        sections.push(format!("{REASONING_HEADING}\n{}", build_cot_suffix()));
    }

    Ok(PromptPayload {
        system_instructions: if profile.use_instruction_header {
            INSTRUCTION_HEADER.to_string()
        } else {
            String::new()
        },
        user_message: sections.join("\n\n"),
        metadata: Default::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Aligned,
    Misaligned(String),
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("verdict unparseable: final line {last_line:?}")]
    VerdictUnparseable { last_line: String },
}

/// Reads the verdict from the last non-empty line only.
pub fn parse_verdict(reply: &str) -> Result<Verdict, VerifyError> {
    let last = reply.lines().rev().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let unparseable = || VerifyError::VerdictUnparseable {
        last_line: last.to_string(),
    };
    let rest = last.strip_prefix("VERDICT:").ok_or_else(unparseable)?.trim();
    if rest == "ALIGNED" {
        return Ok(Verdict::Aligned);
    }
    let reason = rest.strip_prefix("MISALIGNED").ok_or_else(unparseable)?;
    let reason = match reason.trim_start().strip_prefix(':') {
        Some(r) => r.trim(),
        None if reason.trim().is_empty() => "",
        None => return Err(unparseable()),
    };
    Ok(Verdict::Misaligned(if reason.is_empty() {
        "no reason given".to_string()
    } else {
        reason.to_string()
    }))
}

/// Prompt for the alignment check of a generated configuration.
pub fn build_verification_prompt(
    config: &ConfigDocument,
    request: &GenerationRequest,
    shots: &[FewShotExample],
) -> PromptPayload {
    let mut sections = vec![format!("{CONFIGURATION_HEADING}\n{}", render_yaml_block(&config.to_yaml()))];
    if !shots.is_empty() {
        sections.push(format!("{EXAMPLES_HEADING}\n{}", render_examples(shots)));
    }
    sections.push(format!("{INTENT_HEADING}\n{}", request.intent));
    sections.push(format!("{TASK_HEADING}\n{}", render_task(request)));
    sections.push(format!("{REASONING_HEADING}\n{}", build_cot_suffix()));
    PromptPayload {
        system_instructions: VERIFIER_HEADER.to_string(),
        user_message: sections.join("\n\n"),
        metadata: Default::default(),
    }
}

/// One provider call asking whether `config` matches the request.
pub fn verify_alignment(
    provider: &dyn ChatProvider,
    params: &SamplingParams,
    config: &ConfigDocument,
    request: &GenerationRequest,
    shots: &[FewShotExample],
    metadata: &[(&str, String)],
) -> Result<(Verdict, RawResponse), (VerifyError, Option<RawResponse>)> {
    let mut payload = build_verification_prompt(config, request, shots);
    for (k, v) in metadata {
        payload.metadata.insert(k.to_string(), v.clone());
    }
    let response = complete(provider, &payload, params).map_err(|e| (VerifyError::from(e), None))?;
    match parse_verdict(&response.text) {
        Ok(v) => Ok((v, response)),
        Err(e) => Err((e, Some(response))),
    }
}
