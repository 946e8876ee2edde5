//! Feedback-based prompt chaining.
//!
//! Each attempt walks the stages in order: generate, clean and parse,
//! check assertions, verify alignment, deploy, benchmark. The first failing
//! stage produces a [`FeedbackContext`] that is appended to the original
//! prompt for the next attempt.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigDocument;
use crate::deploy::{BenchmarkResultDyn, DeployBackend, DeploymentOutcome, Workload};
use crate::gateway::{complete, mock::verify_scenario, ChatProvider, PromptPayload, RawResponse};
use crate::preprocess::preprocess;
use crate::prompt::templates::FEEDBACK_HEADING;
use crate::prompt::{
    build_prompt, verify_alignment, ContextChunk, GenerationRequest, OptimizationProfile, PromptError, ShotLibrary,
    Verdict, VerifyError,
};
use crate::retrieval::{retrieve, RetrievalIndex, DEFAULT_TOP_K};
use crate::validation::{evaluate, Assertion, ValidationReport};

pub const LOG_LINE_CAP: usize = 50;
const SEVERITY_MARKERS: [&str; 7] = ["error", "warn", "fatal", "exception", "failed", "denied", "insufficient"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Generation,
    Structural,
    StaticValidation,
    CoTVerification,
    Deployment,
    RuntimeBenchmark,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Keeps severity-marked lines, collapses consecutive repeats and caps the
/// result at [`LOG_LINE_CAP`] lines (first and last halves around a marker).
pub fn filter_logs(raw: &str) -> Vec<String> {
    let mut kept: Vec<String> = Vec::new();
    for line in raw.lines() {
        let line = line.trim_end();
        let lower = line.to_lowercase();
        if !SEVERITY_MARKERS.iter().any(|m| lower.contains(m)) {
            continue;
        }
        if kept.last().map(String::as_str) != Some(line) {
            kept.push(line.to_string());
        }
    }
    if kept.len() > LOG_LINE_CAP {
        let half = LOG_LINE_CAP / 2;
        let elided = kept.len() - 2 * half;
        let tail = kept.split_off(kept.len() - half);
        kept.truncate(half);
        kept.push(format!("... [{elided} lines elided] ..."));
        kept.extend(tail);
    }
    kept
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackContext {
    pub failed_stage: Stage,
    pub filtered_lines: Vec<String>,
    pub summary: String,
}

impl FeedbackContext {
    fn new(failed_stage: Stage, prior: Option<Stage>, reason: &str, raw_lines: &str) -> Self {
        let summary = match prior {
            Some(prior) => format!("{failed_stage} failed after {prior} succeeded due to {reason}"),
            None => format!("{failed_stage} failed due to {reason}"),
        };
        let mut filtered_lines = filter_logs(raw_lines);
        if filtered_lines.is_empty() {
            filtered_lines.push(format!("error: {reason}"));
        }
        Self {
            failed_stage,
            filtered_lines,
            summary,
        }
    }

    /// Prompt section appended to the next attempt.
    pub fn render(&self) -> String {
        format!(
            "{FEEDBACK_HEADING}\n{}\n{}\nFix these problems and return the complete corrected configuration.",
            self.summary,
            self.filtered_lines.join("\n")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_seconds: f64,
}

impl CallRecord {
    fn new(kind: &str, r: &RawResponse) -> Self {
        Self {
            kind: kind.to_string(),
            prompt_tokens: r.prompt_tokens,
            completion_tokens: r.completion_tokens,
            latency_seconds: r.latency_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    /// Stages entered, in order.
    pub stages: Vec<Stage>,
    pub reached_stage: Stage,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_yaml: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deployment: Option<DeploymentOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkResultDyn>,
    pub calls: Vec<CallRecord>,
    /// Provider error that aborted the chain on this attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Full prompt sent for generation on this attempt.
    pub prompt: String,
}

impl AttemptRecord {
    fn new(attempt: u32, prompt: String) -> Self {
        Self {
            attempt,
            stages: Vec::new(),
            reached_stage: Stage::Generation,
            passed: false,
            feedback: None,
            config_yaml: None,
            validation: None,
            verdict: None,
            deployment: None,
            benchmark: None,
            calls: Vec::new(),
            error: None,
            prompt,
        }
    }

    fn enter(&mut self, stage: Stage) {
        debug_assert!(self.stages.last().is_none_or(|s| *s < stage));
        self.stages.push(stage);
        self.reached_stage = stage;
    }

    fn fail(&mut self, reason: &str, raw_lines: &str) {
        let prior = self.stages.iter().rev().nth(1).copied();
        self.feedback = Some(FeedbackContext::new(self.reached_stage, prior, reason, raw_lines));
    }

    pub fn total_tokens(&self) -> u64 {
        self.calls.iter().map(|c| c.prompt_tokens + c.completion_tokens).sum()
    }
}

fn serialize_final<S: serde::Serializer>(doc: &Option<ConfigDocument>, s: S) -> Result<S::Ok, S::Error> {
    match doc {
        Some(d) => s.serialize_some(&d.to_yaml()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainOutcome {
    pub scenario: String,
    pub profile: String,
    pub system: String,
    pub resolved: bool,
    pub attempts_used: u32,
    pub max_attempts: u32,
    #[serde(serialize_with = "serialize_final")]
    pub final_config: Option<ConfigDocument>,
    pub attempt_history: Vec<AttemptRecord>,
    pub total_tokens: u64,
    pub total_latency_seconds: f64,
}

impl ChainOutcome {
    pub fn last_attempt(&self) -> Option<&AttemptRecord> {
        self.attempt_history.last()
    }

    pub fn calls(&self) -> impl Iterator<Item = &CallRecord> {
        self.attempt_history.iter().flat_map(|a| a.calls.iter())
    }

    pub fn completion_tokens(&self) -> u64 {
        self.calls().map(|c| c.completion_tokens).sum()
    }

    pub fn prompt_tokens(&self) -> u64 {
        self.calls().map(|c| c.prompt_tokens).sum()
    }

    pub fn benchmark(&self) -> Option<&BenchmarkResultDyn> {
        self.last_attempt().and_then(|a| a.benchmark.as_ref())
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Everything a chain needs besides the request and the profile.
#[derive(Clone, Copy)]
pub struct ChainDeps<'a> {
    pub provider: &'a dyn ChatProvider,
    pub shots: &'a ShotLibrary,
    pub index: Option<&'a RetrievalIndex>,
    pub retrieval_k: usize,
    pub assertions: &'a [Assertion],
    pub deployer: Option<&'a dyn DeployBackend>,
    pub workload: Option<Workload>,
}

impl<'a> ChainDeps<'a> {
    pub fn new(provider: &'a dyn ChatProvider, shots: &'a ShotLibrary) -> Self {
        Self {
            provider,
            shots,
            index: None,
            retrieval_k: DEFAULT_TOP_K,
            assertions: &[],
            deployer: None,
            workload: None,
        }
    }
}

fn attempt_payload(base: &PromptPayload, feedback: Option<&FeedbackContext>) -> PromptPayload {
    let mut payload = base.clone();
    if let Some(fb) = feedback {
        payload.user_message = format!("{}\n\n{}", payload.user_message, fb.render());
    }
    payload
}

/// Runs up to `profile.max_chain_attempts` attempts for one request.
///
/// `scenario` identifies the run towards the provider (it routes scripted
/// replies) and in transcripts.
pub fn run_chain(
    scenario: &str,
    request: &GenerationRequest,
    profile: &OptimizationProfile,
    deps: &ChainDeps<'_>,
) -> Result<ChainOutcome, ChainError> {
    profile.validate()?;
    request.validate()?;

    let shots = if profile.use_few_shot {
        deps.shots.shots_for(&request.system)
    } else {
        &[]
    };
    let chunks: Vec<ContextChunk> = match (profile.use_retrieval, deps.index) {
        (true, Some(index)) => retrieve(index, &format!("{}\n{}", request.intent, request.prompt), deps.retrieval_k)
            .iter()
            .map(ContextChunk::from)
            .collect(),
        _ => Vec::new(),
    };
    let base = build_prompt(profile, request, shots, &chunks)?;
    let params = profile.effective_sampling();

    let mut outcome = ChainOutcome {
        scenario: scenario.to_string(),
        profile: profile.name.to_string(),
        system: request.system.clone(),
        resolved: false,
        attempts_used: 0,
        max_attempts: profile.max_chain_attempts,
        final_config: None,
        attempt_history: Vec::new(),
        total_tokens: 0,
        total_latency_seconds: 0.0,
    };
    let mut feedback: Option<FeedbackContext> = None;

    for attempt in 1..=profile.max_chain_attempts {
        let payload = attempt_payload(&base, feedback.as_ref())
            .with_meta("scenario", scenario)
            .with_meta("attempt", attempt.to_string())
            .with_meta("profile", profile.name.as_str());
        let mut record = AttemptRecord::new(attempt, payload.full_text());
        let result = run_attempt(&mut record, scenario, request, profile, deps, shots, &payload, &params);

        outcome.attempts_used = attempt;
        outcome.total_tokens += record.total_tokens();
        outcome.total_latency_seconds += record.calls.iter().map(|c| c.latency_seconds).sum::<f64>();
        feedback = record.feedback.clone();
        let aborted = record.error.is_some();
        outcome.attempt_history.push(record);

        match result {
            AttemptResult::Passed(config) => {
                outcome.resolved = true;
                outcome.final_config = Some(config);
                break;
            }
            AttemptResult::Failed if aborted => break,
            AttemptResult::Failed => {}
        }
    }
    Ok(outcome)
}

enum AttemptResult {
    Passed(ConfigDocument),
    Failed,
}

#[allow(clippy::too_many_arguments)]
fn run_attempt(
    record: &mut AttemptRecord,
    scenario: &str,
    request: &GenerationRequest,
    profile: &OptimizationProfile,
    deps: &ChainDeps<'_>,
    shots: &[crate::prompt::FewShotExample],
    payload: &PromptPayload,
    params: &crate::gateway::SamplingParams,
) -> AttemptResult {
    record.enter(Stage::Generation);
    let response = match complete(deps.provider, payload, params) {
        Ok(r) => r,
        Err(e) => {
            record.error = Some(e.to_string());
            record.fail(&e.to_string(), &format!("error: {e}"));
            return AttemptResult::Failed;
        }
    };
    record.calls.push(CallRecord::new("generate", &response));

    record.enter(Stage::Structural);
    let config = match preprocess(&response.text) {
        Ok(c) => c,
        Err(e) => {
            record.fail(&e.to_string(), &format!("error: structural validation failed: {e}"));
            return AttemptResult::Failed;
        }
    };
    record.config_yaml = Some(config.to_yaml());

    if !deps.assertions.is_empty() {
        record.enter(Stage::StaticValidation);
        let report = evaluate(scenario, &config, deps.assertions);
        let passed = report.passed;
        if !passed {
            let failures: Vec<String> = report.failures().map(|r| r.describe()).collect();
            let reason = format!(
                "{} of {} assertions failing: {}",
                failures.len(),
                report.results.len(),
                failures[0]
            );
            let lines: Vec<String> = failures.iter().map(|f| format!("error: assertion failed: {f}")).collect();
            record.validation = Some(report);
            record.fail(&reason, &lines.join("\n"));
            return AttemptResult::Failed;
        }
        record.validation = Some(report);
    }

    if profile.use_cot {
        record.enter(Stage::CoTVerification);
        let meta = [
            ("scenario", verify_scenario(scenario)),
            ("attempt", record.attempt.to_string()),
            ("profile", profile.name.to_string()),
        ];
        match verify_alignment(deps.provider, params, &config, request, shots, &meta) {
            Ok((verdict, response)) => {
                record.calls.push(CallRecord::new("verify", &response));
                record.verdict = Some(verdict.clone());
                if let Verdict::Misaligned(why) = verdict {
                    record.fail(
                        &format!("misalignment with the user intent: {why}"),
                        &format!("error: verification failed: {why}"),
                    );
                    return AttemptResult::Failed;
                }
            }
            Err((VerifyError::Gateway(e), _)) => {
                record.error = Some(e.to_string());
                record.fail(&e.to_string(), &format!("error: {e}"));
                return AttemptResult::Failed;
            }
            Err((e @ VerifyError::VerdictUnparseable { .. }, response)) => {
                if let Some(r) = response {
                    record.calls.push(CallRecord::new("verify", &r));
                }
                record.fail("an unparseable verdict", &format!("error: {e}"));
                return AttemptResult::Failed;
            }
        }
    }

    if let Some(deployer) = deps.deployer {
        record.enter(Stage::Deployment);
        let deployment = match deployer.deploy(&config, &request.system) {
            Ok(d) => d,
            Err(e) => {
                record.fail(&e.to_string(), &format!("error: {e}"));
                return AttemptResult::Failed;
            }
        };
        record.deployment = Some(deployment.outcome.clone());
        if !deployment.outcome.success {
            let reason = deployment
                .outcome
                .failure_reason
                .clone()
                .unwrap_or_else(|| "an unknown deployment failure".into());
            record.fail(&reason, &deployment.outcome.logs);
            return AttemptResult::Failed;
        }

        if let Some(workload) = &deps.workload {
            record.enter(Stage::RuntimeBenchmark);
            match deployer.benchmark(&deployment, workload) {
                Ok(result) => record.benchmark = Some(result),
                Err(e) => {
                    record.fail(&e.to_string(), &format!("error: benchmark failed: {e}"));
                    return AttemptResult::Failed;
                }
            }
        }
    }

    record.passed = true;
    AttemptResult::Passed(config)
}

/// One persisted transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub scenario: String,
    pub profile: String,
    pub system: String,
    pub max_attempts: u32,
    #[serde(flatten)]
    pub record: AttemptRecord,
}

/// Writes one JSON object per attempt.
pub fn write_transcript(path: &Path, outcome: &ChainOutcome) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in &outcome.attempt_history {
        let line = TranscriptLine {
            scenario: outcome.scenario.clone(),
            profile: outcome.profile.clone(),
            system: outcome.system.clone(),
            max_attempts: outcome.max_attempts,
            record: record.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptLine>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).map_err(std::io::Error::from)?);
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_filter() {
        let mut raw: Vec<String> = (0..100).map(|i| format!("INFO step {i} ok")).collect();
        raw.push("Error: OOMKilled".into());
        assert_eq!(filter_logs(&raw.join("\n")), vec!["Error: OOMKilled"]);
    }

    #[test]
    fn consecutive_duplicates_collapse() {
        let raw = ["Error: OOMKilled"; 5].join("\n");
        assert_eq!(filter_logs(&raw), vec!["Error: OOMKilled"]);
    }

    #[test]
    fn cap_keeps_head_and_tail() {
        let raw: Vec<String> = (0..80).map(|i| format!("error {i}")).collect();
        let out = filter_logs(&raw.join("\n"));
        assert_eq!(out.len(), 51);
        assert_eq!(out[24], "error 24");
        assert_eq!(out[25], "... [30 lines elided] ...");
        assert_eq!(out[26], "error 55");
        assert_eq!(out[50], "error 79");
    }

    #[test]
    fn markers_are_case_insensitive() {
        let raw = "WARNING: low disk\npermission DENIED\nall good\nFATAL crash\nInsufficient cpu";
        assert_eq!(filter_logs(raw).len(), 4);
    }

    #[test]
    fn summary_shape() {
        let fb = FeedbackContext::new(
            Stage::Deployment,
            Some(Stage::StaticValidation),
            "insufficient memory",
            "ERROR replica 0 unschedulable: insufficient memory",
        );
        assert_eq!(
            fb.summary,
            "Deployment failed after StaticValidation succeeded due to insufficient memory"
        );
        assert!(fb.render().contains("ERROR replica 0 unschedulable"));
        let fb = FeedbackContext::new(Stage::Structural, Some(Stage::Generation), "bad yaml", "nothing marked");
        assert_eq!(fb.filtered_lines, vec!["error: bad yaml"]);
    }
}
