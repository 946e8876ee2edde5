//! Benchmark harness: dataset loading, static and dynamic evaluation, and
//! the report tables built from chain outcomes.

mod dataset;
mod reports;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_case, load_case_scripts, load_dataset, BenchmarkCase, LEVELS};
pub use reports::{cost_report, latency_report, CostRecord, CostReport, CostRow, LatencyRow};

use crate::chain::{run_chain, ChainDeps, ChainOutcome, Stage};
use crate::deploy::{DeployBackend, ResourceSpec, Workload};
use crate::gateway::ChatProvider;
use crate::prompt::{OptimizationProfile, ShotLibrary};
use crate::retrieval::{RetrievalIndex, DEFAULT_TOP_K};
use crate::stats::mean_std;

/// The three intents used for dynamic validation.
pub const DEFAULT_INTENTS: [&str; 3] = [
    "Low cost and resource consumption",
    "High scalability",
    "High efficiency balancing processing costs, resource consumption, and scalability",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {detail}", path.display())]
    Io { path: PathBuf, detail: String },
    #[error("{}: malformed case file: {detail}", path.display())]
    Malformed { path: PathBuf, detail: String },
    #[error("duplicate case id {id:?} in {} and {}", first.display(), second.display())]
    DuplicateId { id: String, first: PathBuf, second: PathBuf },
    #[error("{}: no benchmark cases found", .0.display())]
    Empty(PathBuf),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("nothing to aggregate")]
    EmptyCorpus,
    #[error("no workload configured for system {0:?}")]
    MissingWorkload(String),
    #[error("rate per token must be positive, got {0}")]
    InvalidRate(f64),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Shared inputs for evaluation runs.
#[derive(Clone, Copy)]
pub struct EvalDeps<'a> {
    pub provider: &'a dyn ChatProvider,
    pub shots: &'a ShotLibrary,
    pub index: Option<&'a RetrievalIndex>,
    pub retrieval_k: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl<'a> EvalDeps<'a> {
    pub fn new(provider: &'a dyn ChatProvider, shots: &'a ShotLibrary) -> Self {
        Self {
            provider,
            shots,
            index: None,
            retrieval_k: DEFAULT_TOP_K,
            jobs: None,
        }
    }

    fn chain_deps(&self) -> ChainDeps<'a> {
        let mut deps = ChainDeps::new(self.provider, self.shots);
        deps.index = self.index;
        deps.retrieval_k = self.retrieval_k;
        deps
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, EvalError> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| EvalError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Per (case, profile) result of a static run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub system: String,
    pub level: u8,
    pub profile: String,
    pub resolved: bool,
    pub attempts_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reached_stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Provider or setup error that prevented a normal run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseResult {
    fn from_outcome(case: &BenchmarkCase, profile: &OptimizationProfile, outcome: &ChainOutcome) -> Self {
        let last = outcome.last_attempt();
        Self {
            case_id: case.id.clone(),
            system: case.system.clone(),
            level: case.level,
            profile: profile.name.to_string(),
            resolved: outcome.resolved,
            attempts_used: outcome.attempts_used,
            reached_stage: last.map(|a| a.reached_stage),
            failure: last.and_then(|a| a.feedback.as_ref()).map(|f| f.summary.clone()),
            error: last.and_then(|a| a.error.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub level: u8,
    pub cases: usize,
    /// Percent per profile, aligned with [`AccuracyTable::profiles`].
    pub accuracy: Vec<f64>,
}

/// Accuracy by difficulty level, profiles as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub profiles: Vec<String>,
    pub rows: Vec<AccuracyRow>,
    pub totals: Vec<f64>,
    pub total_cases: usize,
}

impl AccuracyTable {
    /// Builds the table from results; `profiles` fixes column order.
    pub fn from_results(profiles: &[String], results: &[CaseResult]) -> Self {
        let percent = |hits: usize, n: usize| if n == 0 { 0.0 } else { 100.0 * hits as f64 / n as f64 };
        let count = |profile: &str, level: Option<u8>| -> (usize, usize) {
            let relevant = results
                .iter()
                .filter(|r| r.profile == profile && level.is_none_or(|l| r.level == l));
            relevant.fold((0, 0), |(hits, n), r| (hits + r.resolved as usize, n + 1))
        };
        let mut levels: Vec<u8> = results.iter().map(|r| r.level).collect();
        levels.sort_unstable();
        levels.dedup();
        let rows = levels
            .iter()
            .map(|&level| AccuracyRow {
                level,
                cases: profiles.first().map_or(0, |p| count(p, Some(level)).1),
                accuracy: profiles
                    .iter()
                    .map(|p| {
                        let (hits, n) = count(p, Some(level));
                        percent(hits, n)
                    })
                    .collect(),
            })
            .collect();
        let totals = profiles
            .iter()
            .map(|p| {
                let (hits, n) = count(p, None);
                percent(hits, n)
            })
            .collect();
        Self {
            profiles: profiles.to_vec(),
            rows,
            totals,
            total_cases: profiles.first().map_or(0, |p| count(p, None).1),
        }
    }

    pub fn cell(&self, profile: &str, level: u8) -> Option<f64> {
        let col = self.profiles.iter().position(|p| p == profile)?;
        self.rows.iter().find(|r| r.level == level).map(|r| r.accuracy[col])
    }

    pub fn total(&self, profile: &str) -> Option<f64> {
        let col = self.profiles.iter().position(|p| p == profile)?;
        Some(self.totals[col])
    }
}

impl fmt::Display for AccuracyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.profiles.iter().map(|p| p.len()).max().unwrap_or(0).max(6);
        write!(f, "{:<6}", "Level")?;
        for p in &self.profiles {
            write!(f, "  {p:>width$}")?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{:<6}", row.level)?;
            for v in &row.accuracy {
                write!(f, "  {v:>width$.2}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{:<6}", "Total")?;
        for v in &self.totals {
            write!(f, "  {v:>width$.2}")?;
        }
        writeln!(f)
    }
}

/// Result of [`run_static_eval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEvalReport {
    pub table: AccuracyTable,
    pub per_system: BTreeMap<String, AccuracyTable>,
    pub results: Vec<CaseResult>,
    /// Cases that hit a provider or setup error.
    pub errors: Vec<CaseResult>,
}

impl StaticEvalReport {
    pub fn render_text(&self) -> String {
        let mut out = format!("All systems ({} cases)\n{}", self.table.total_cases, self.table);
        for (system, table) in &self.per_system {
            out.push_str(&format!("\n{system} ({} cases)\n{table}", table.total_cases));
        }
        if !self.errors.is_empty() {
            out.push_str("\nErrors\n");
            for e in &self.errors {
                out.push_str(&format!(
                    "{} [{}]: {}\n",
                    e.case_id,
                    e.profile,
                    e.error.as_deref().unwrap_or("")
                ));
            }
        }
        out
    }
}

fn static_case(case: &BenchmarkCase, profile: &OptimizationProfile, deps: &EvalDeps<'_>) -> CaseResult {
    let mut chain_deps = deps.chain_deps();
    chain_deps.assertions = &case.assertions;
    match run_chain(&case.id, &case.request(), profile, &chain_deps) {
        Ok(outcome) => CaseResult::from_outcome(case, profile, &outcome),
        Err(e) => CaseResult {
            case_id: case.id.clone(),
            system: case.system.clone(),
            level: case.level,
            profile: profile.name.to_string(),
            resolved: false,
            attempts_used: 0,
            reached_stage: None,
            failure: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs each profile over every case without deployment. A case counts as
/// passed when its chain resolves.
pub fn run_static_eval(
    cases: &[BenchmarkCase],
    profiles: &[OptimizationProfile],
    deps: &EvalDeps<'_>,
) -> Result<StaticEvalReport, EvalError> {
    if cases.is_empty() || profiles.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let pairs: Vec<(&OptimizationProfile, &BenchmarkCase)> =
        profiles.iter().flat_map(|p| cases.iter().map(move |c| (p, c))).collect();
    let results: Vec<CaseResult> = in_pool(deps.jobs, || {
        pairs.par_iter().map(|(p, c)| static_case(c, p, deps)).collect()
    })?;

    let names: Vec<String> = profiles.iter().map(|p| p.name.to_string()).collect();
    let mut per_system = BTreeMap::new();
    let mut systems: Vec<&str> = cases.iter().map(|c| c.system.as_str()).collect();
    systems.sort_unstable();
    systems.dedup();
    for system in systems {
        let subset: Vec<CaseResult> = results.iter().filter(|r| r.system == system).cloned().collect();
        per_system.insert(system.to_string(), AccuracyTable::from_results(&names, &subset));
    }
    Ok(StaticEvalReport {
        table: AccuracyTable::from_results(&names, &results),
        per_system,
        errors: results.iter().filter(|r| r.error.is_some()).cloned().collect(),
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicRow {
    pub case_id: String,
    pub system: String,
    /// 1-based position in the intent list.
    pub intent_index: usize,
    pub intent: String,
    pub resolved: bool,
    pub attempts_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_dollars: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<ResourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Means over resolved rows for one (system, intent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicGroup {
    pub system: String,
    pub intent_index: usize,
    pub intent: String,
    pub rows: usize,
    pub resolved: usize,
    pub mean_completion_seconds: Option<f64>,
    pub mean_cost_dollars: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicReport {
    pub profile: String,
    pub rows: Vec<DynamicRow>,
    pub groups: Vec<DynamicGroup>,
}

impl fmt::Display for DynamicReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:<6} {:>8} {:>14} {:>12}", "System", "Intent", "Resolved", "Time (s)", "Cost ($)")?;
        for g in &self.groups {
            let time = g.mean_completion_seconds.map_or("-".into(), |t| format!("{t:.3}"));
            let cost = g.mean_cost_dollars.map_or("-".into(), |c| format!("{c:.7}"));
            writeln!(
                f,
                "{:<10} {:<6} {:>8} {:>14} {:>12}",
                g.system,
                g.intent_index,
                format!("{}/{}", g.resolved, g.rows),
                time,
                cost
            )?;
        }
        Ok(())
    }
}

/// Runs the full chain (deployment and benchmark included) for every case
/// and intent. Scenario ids are `<case id>/intent<i>`.
pub fn run_dynamic_eval(
    cases: &[BenchmarkCase],
    profile: &OptimizationProfile,
    intents: &[String],
    deps: &EvalDeps<'_>,
    deployer: &dyn DeployBackend,
    workloads: &BTreeMap<String, Workload>,
) -> Result<DynamicReport, EvalError> {
    if cases.is_empty() || intents.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    for case in cases {
        if !workloads.contains_key(&case.system) {
            return Err(EvalError::MissingWorkload(case.system.clone()));
        }
    }
    let jobs: Vec<(&BenchmarkCase, usize)> = cases
        .iter()
        .flat_map(|c| (0..intents.len()).map(move |i| (c, i)))
        .collect();
    let rows: Vec<DynamicRow> = in_pool(deps.jobs, || {
        jobs.par_iter()
            .map(|&(case, i)| {
                let mut chain_deps = deps.chain_deps();
                chain_deps.assertions = &case.assertions;
                chain_deps.deployer = Some(deployer);
                chain_deps.workload = workloads.get(&case.system).copied();
                let mut request = case.request();
                request.intent = intents[i].clone();
                let scenario = format!("{}/intent{}", case.id, i + 1);
                let mut row = DynamicRow {
                    case_id: case.id.clone(),
                    system: case.system.clone(),
                    intent_index: i + 1,
                    intent: intents[i].clone(),
                    resolved: false,
                    attempts_used: 0,
                    completion_seconds: None,
                    cost_dollars: None,
                    resources: None,
                    failure: None,
                };
                match run_chain(&scenario, &request, profile, &chain_deps) {
                    Ok(outcome) => {
                        row.resolved = outcome.resolved;
                        row.attempts_used = outcome.attempts_used;
                        if let Some(b) = outcome.benchmark().filter(|_| outcome.resolved) {
                            row.completion_seconds = Some(b.completion_seconds);
                            row.cost_dollars = Some(b.cost_dollars);
                            row.resources = Some(b.resources);
                        }
                        row.failure = outcome
                            .last_attempt()
                            .filter(|_| !outcome.resolved)
                            .and_then(|a| a.feedback.as_ref())
                            .map(|f| f.summary.clone());
                    }
                    Err(e) => row.failure = Some(e.to_string()),
                }
                row
            })
            .collect()
    })?;

    let mut groups = Vec::new();
    let mut systems: Vec<&str> = cases.iter().map(|c| c.system.as_str()).collect();
    systems.sort_unstable();
    systems.dedup();
    for system in systems {
        for (i, intent) in intents.iter().enumerate() {
            let members: Vec<&DynamicRow> = rows
                .iter()
                .filter(|r| r.system == system && r.intent_index == i + 1)
                .collect();
            let times: Vec<f64> = members.iter().filter_map(|r| r.completion_seconds).collect();
            let costs: Vec<f64> = members.iter().filter_map(|r| r.cost_dollars).collect();
            groups.push(DynamicGroup {
                system: system.to_string(),
                intent_index: i + 1,
                intent: intent.clone(),
                rows: members.len(),
                resolved: members.iter().filter(|r| r.resolved).count(),
                mean_completion_seconds: mean_std(&times).map(|m| m.0),
                mean_cost_dollars: mean_std(&costs).map(|m| m.0),
            });
        }
    }
    Ok(DynamicReport {
        profile: profile.name.to_string(),
        rows,
        groups,
    })
}

/// The part of a chain outcome the resolution curve looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolutionPoint {
    pub resolved: bool,
    pub attempts_used: u32,
    pub max_attempts: u32,
}

impl From<&ChainOutcome> for ResolutionPoint {
    fn from(o: &ChainOutcome) -> Self {
        Self {
            resolved: o.resolved,
            attempts_used: o.attempts_used,
            max_attempts: o.max_attempts,
        }
    }
}

/// `curve[k-1]` is the percent of outcomes resolved within `k` attempts,
/// for `k` up to the largest attempt budget.
pub fn resolution_curve_points(points: &[ResolutionPoint]) -> Result<Vec<f64>, EvalError> {
    if points.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let max = points.iter().map(|p| p.max_attempts.max(p.attempts_used)).max().unwrap_or(0);
    let n = points.len() as f64;
    Ok((1..=max)
        .map(|k| {
            let hits = points.iter().filter(|p| p.resolved && p.attempts_used <= k).count();
            100.0 * hits as f64 / n
        })
        .collect())
}

pub fn resolution_curve(outcomes: &[ChainOutcome]) -> Result<Vec<f64>, EvalError> {
    let points: Vec<ResolutionPoint> = outcomes.iter().map(ResolutionPoint::from).collect();
    resolution_curve_points(&points)
}
