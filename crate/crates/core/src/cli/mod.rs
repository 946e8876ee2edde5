//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 domain failure (unresolved chain, failed
//! validation or deployment), 2 usage or configuration error.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use config::{AppConfig, ProviderSettings, RetrievalSettings, DEFAULT_RATE_PER_TOKEN};

use crate::chain::{read_transcript, run_chain, write_transcript, ChainDeps, ChainOutcome, TranscriptLine};
use crate::deploy::{ClusterFile, DeployBackend, ShellBackend, Simulator, SystemProfiles, Workload};
use crate::eval::{
    cost_report, latency_report, load_case_scripts, load_dataset, resolution_curve_points, run_dynamic_eval,
    run_static_eval, BenchmarkCase, CostRecord, CostReport, EvalDeps, LatencyRow, ResolutionPoint, DEFAULT_INTENTS,
};
use crate::gateway::{ChatProvider, HttpProvider, MockProvider, MockScript};
use crate::preprocess::{parse_config, preprocess};
use crate::prompt::{GenerationRequest, OptimizationProfile, ProfileName, ShotLibrary};
use crate::retrieval::{load_corpus, RetrievalIndex};
use crate::validation::{aggregate_complexity, evaluate, Assertion};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "lads", version, about = "Generate, validate and deploy cluster configurations from natural-language intents")]
pub struct Cli {
    /// Settings file.
    #[arg(long, env = "LADS_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Extra mock script files (forces the mock provider).
    #[arg(long = "mock-script", global = true)]
    pub mock_scripts: Vec<PathBuf>,
    /// Benchmark dataset directory.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Few-shot example directory.
    #[arg(long, global = true)]
    pub shots: Option<PathBuf>,
    /// Documentation directory for retrieval.
    #[arg(long, global = true)]
    pub docs: Option<PathBuf>,
    /// Simulated cluster description.
    #[arg(long, global = true)]
    pub cluster: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one configuration through the feedback chain.
    Generate(GenerateArgs),
    /// Check a configuration file against assertions.
    Validate(ValidateArgs),
    /// Deploy a configuration file and run its workload.
    Deploy(DeployArgs),
    /// Run the chain on every dataset case and report the resolution curve.
    Chain(ChainArgs),
    /// Static (and optionally dynamic) evaluation over the dataset.
    Bench(BenchArgs),
    /// Key count and depth statistics of configuration files.
    Complexity(ComplexityArgs),
    /// Cost, latency and resolution reports from saved transcripts.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Simulator,
    Shell,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Where configurations are deployed.
    #[arg(long, value_enum, default_value = "simulator")]
    pub deploy_backend: BackendKind,
    /// Cluster CLI used by the shell backend.
    #[arg(long, default_value = "kubectl")]
    pub kubectl: String,
    /// Context passed to the cluster CLI.
    #[arg(long)]
    pub kube_context: Option<String>,
    /// Allow the shell backend to apply to a real cluster.
    #[arg(long = "i-understand-this-applies-to-a-real-cluster")]
    pub real_cluster: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Target system, such as dask, ray or redis.
    #[arg(long)]
    pub system: String,
    /// What to deploy.
    #[arg(long)]
    pub prompt: String,
    /// Optimisation goal for the configuration.
    #[arg(long)]
    pub intent: String,
    /// Prompt profile: IP, CoT, RAG, FSL or LADS.
    #[arg(long)]
    pub profile: Option<ProfileName>,
    /// Resource limits the configuration must respect.
    #[arg(long)]
    pub resource_context: Option<String>,
    /// Assertion list (YAML) checked after parsing.
    #[arg(long)]
    pub assertions: Option<PathBuf>,
    /// Scenario id used for scripted replies and file names.
    #[arg(long, default_value = "generate")]
    pub scenario: String,
    /// Where to write the final configuration.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Attempt budget for the feedback chain.
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// Stop after static checks.
    #[arg(long)]
    pub static_only: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Configuration file.
    pub file: PathBuf,
    /// Assertion list (YAML).
    #[arg(long)]
    pub assertions: PathBuf,
    /// Treat the file as raw model output and clean it first.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct DeployArgs {
    /// Configuration file.
    pub file: PathBuf,
    /// System profile used to read resources.
    #[arg(long)]
    pub system: String,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Prompt profile: IP, CoT, RAG, FSL or LADS.
    #[arg(long)]
    pub profile: Option<ProfileName>,
    /// Attempt budget for the feedback chain.
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// Stop after static checks.
    #[arg(long)]
    pub static_only: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated profiles (defaults to all five).
    #[arg(long, value_delimiter = ',')]
    pub profiles: Vec<ProfileName>,
    /// Where to write the accuracy tables (defaults to the output directory).
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    /// Attempt budget for the feedback chain.
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// Also deploy every case under each intent.
    #[arg(long)]
    pub dynamic: bool,
    /// Intents for the dynamic run (defaults to the built-in three).
    #[arg(long = "intent")]
    pub intents: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// File paths or glob patterns.
    #[arg(required = true)]
    pub patterns: Vec<String>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of `.jsonl` transcripts (defaults to `<output>/transcripts`).
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
    /// Dollars per token (overrides the configured rate).
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug)]
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<u8, UsageError>;

type Backend = (Box<dyn DeployBackend>, BTreeMap<String, Workload>);

/// Parsed settings plus the inputs they point to.
struct Context {
    app: AppConfig,
    extra_scripts: Vec<PathBuf>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, UsageError> {
        let mut app = match &cli.config {
            Some(path) => AppConfig::load(path).map_err(UsageError)?,
            None => AppConfig::default(),
        };
        let overrides = [
            (&mut app.dataset, &cli.dataset),
            (&mut app.shots, &cli.shots),
            (&mut app.docs, &cli.docs),
            (&mut app.cluster, &cli.cluster),
        ];
        for (slot, value) in overrides {
            if value.is_some() {
                *slot = value.clone();
            }
        }
        if let Some(out) = &cli.output_dir {
            app.output_dir = out.clone();
        }
        app.check_paths().map_err(UsageError)?;
        for p in &cli.mock_scripts {
            if !p.exists() {
                return Err(UsageError(format!("mock script {} does not exist", p.display())));
            }
        }
        Ok(Self {
            app,
            extra_scripts: cli.mock_scripts.clone(),
        })
    }

    fn profile(&self, name: Option<ProfileName>, max_attempts: Option<u32>) -> Result<OptimizationProfile, UsageError> {
        let mut profile = OptimizationProfile::preset(name.or(self.app.profile).unwrap_or(ProfileName::Lads));
        if let Some(s) = self.app.sampling {
            profile = profile.with_sampling(s);
        }
        if let Some(d) = self.app.deterministic {
            profile.deterministic = d;
        }
        if let Some(n) = max_attempts.or(self.app.max_chain_attempts) {
            profile = profile.with_max_attempts(n);
        }
        profile.validate()?;
        Ok(profile)
    }

    /// The configured provider. Mock scripts from `dataset_scripts` are
    /// merged first so explicit scripts override them.
    fn provider(&self, dataset_scripts: Option<MockScript>) -> Result<Box<dyn ChatProvider>, UsageError> {
        let explicit_mock = !self.extra_scripts.is_empty();
        match &self.app.provider {
            ProviderSettings::Http(http) if !explicit_mock => Ok(Box::new(HttpProvider::new(http.clone())?)),
            settings => {
                let mut script = dataset_scripts.unwrap_or_default();
                let configured = match settings {
                    ProviderSettings::Mock { scripts } => scripts.as_slice(),
                    ProviderSettings::Http(_) => &[],
                };
                for path in configured.iter().chain(&self.extra_scripts) {
                    script.merge(MockScript::load(path)?);
                }
                Ok(Box::new(MockProvider::new(script)))
            }
        }
    }

    fn shots(&self) -> Result<ShotLibrary, UsageError> {
        match &self.app.shots {
            Some(dir) => Ok(ShotLibrary::load(dir)?),
            None => Ok(ShotLibrary::new()),
        }
    }

    fn index(&self, profiles: &[OptimizationProfile]) -> Result<Option<RetrievalIndex>, UsageError> {
        let (Some(dir), true) = (&self.app.docs, profiles.iter().any(|p| p.use_retrieval)) else {
            return Ok(None);
        };
        let corpus = load_corpus(dir)?;
        let r = &self.app.retrieval;
        let index = RetrievalIndex::build(
            corpus.iter().map(|(id, text)| (id.as_str(), text.as_str())),
            r.chunk_size,
            r.overlap,
        )?;
        Ok(Some(index))
    }

    fn cluster(&self) -> Result<Option<ClusterFile>, UsageError> {
        match &self.app.cluster {
            Some(path) => Ok(Some(ClusterFile::load(path)?)),
            None => Ok(None),
        }
    }

    fn system_profiles(&self) -> Result<SystemProfiles, UsageError> {
        let mut profiles = SystemProfiles::builtin();
        if let Some(path) = &self.app.system_profiles {
            profiles.extend(SystemProfiles::load(path)?);
        }
        Ok(profiles)
    }

    /// Deployment backend and workloads, or `None` when nothing to deploy to.
    fn backend(&self, args: &BackendArgs) -> Result<Option<Backend>, UsageError> {
        let cluster = self.cluster()?;
        let workloads = cluster.as_ref().map(|c| c.workloads.clone()).unwrap_or_default();
        match args.deploy_backend {
            BackendKind::Shell => {
                if !args.real_cluster {
                    return Err(UsageError(
                        "the shell backend needs --i-understand-this-applies-to-a-real-cluster".into(),
                    ));
                }
                let backend = ShellBackend::new(args.kubectl.clone(), args.kube_context.clone(), true);
                Ok(Some((Box::new(backend), workloads)))
            }
            BackendKind::Simulator => Ok(cluster.map(|c| {
                let mut sim = Simulator::new(c.model);
                sim.profiles = self.system_profiles().unwrap_or_else(|_| SystemProfiles::builtin());
                (Box::new(sim) as Box<dyn DeployBackend>, workloads)
            })),
        }
    }

    fn dataset(&self) -> Result<(Vec<BenchmarkCase>, PathBuf), UsageError> {
        let dir = self
            .app
            .dataset
            .clone()
            .ok_or_else(|| UsageError("no dataset configured (use --dataset)".into()))?;
        Ok((load_dataset(&dir)?, dir))
    }

    fn output_dir(&self) -> &Path {
        &self.app.output_dir
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AssertionFile {
    List(Vec<Assertion>),
    Wrapped { assertions: Vec<Assertion> },
}

fn load_assertions(path: &Path) -> Result<Vec<Assertion>, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let file: AssertionFile =
        serde_yaml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    Ok(match file {
        AssertionFile::List(a) | AssertionFile::Wrapped { assertions: a } => a,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), UsageError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| UsageError(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn transcript_name(scenario: &str) -> String {
    scenario.replace(['/', '\\'], "__")
}

fn print_outcome(outcome: &ChainOutcome) {
    for a in &outcome.attempt_history {
        match &a.feedback {
            Some(fb) => println!("attempt {}: {}", a.attempt, fb.summary),
            None => println!("attempt {}: passed ({})", a.attempt, a.reached_stage),
        }
    }
}

fn cmd_generate(ctx: &Context, args: &GenerateArgs) -> CmdResult {
    let profile = ctx.profile(args.profile, args.max_attempts)?;
    let provider = ctx.provider(None)?;
    let shots = ctx.shots()?;
    let index = ctx.index(std::slice::from_ref(&profile))?;
    let assertions = match &args.assertions {
        Some(p) => load_assertions(p)?,
        None => Vec::new(),
    };
    let backend = if args.static_only { None } else { ctx.backend(&args.backend)? };

    let mut request = GenerationRequest::new(&args.system, &args.prompt, &args.intent);
    request.resource_context = args.resource_context.clone();
    let mut deps = ChainDeps::new(provider.as_ref(), &shots);
    deps.index = index.as_ref();
    deps.retrieval_k = ctx.app.retrieval.top_k;
    deps.assertions = &assertions;
    if let Some((backend, workloads)) = &backend {
        deps.deployer = Some(backend.as_ref());
        deps.workload = workloads.get(&args.system).copied();
    }

    let outcome = run_chain(&args.scenario, &request, &profile, &deps)?;
    let transcript = ctx
        .output_dir()
        .join("transcripts")
        .join(format!("{}.jsonl", transcript_name(&args.scenario)));
    write_transcript(&transcript, &outcome)?;
    print_outcome(&outcome);
    println!("transcript: {}", transcript.display());

    match &outcome.final_config {
        Some(config) => {
            let path = args
                .output
                .clone()
                .unwrap_or_else(|| ctx.output_dir().join(format!("{}.yaml", transcript_name(&args.scenario))));
            write_file(&path, &config.to_yaml())?;
            println!("config: {}", path.display());
            Ok(EXIT_OK)
        }
        None => {
            println!("unresolved after {} attempts", outcome.attempts_used);
            Ok(EXIT_DOMAIN)
        }
    }
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let assertions = load_assertions(&args.assertions)?;
    let text = std::fs::read_to_string(&args.file).map_err(|e| UsageError(format!("{}: {e}", args.file.display())))?;
    let parsed = if args.raw { preprocess(&text) } else { parse_config(&text) };
    let case_id = args.file.display().to_string();
    let report = match parsed {
        Ok(config) => evaluate(&case_id, &config, &assertions),
        Err(e) => crate::validation::ValidationReport::structural_failure(&case_id, &assertions, &e),
    };
    if let Some(err) = &report.structural_error {
        println!("structural error: {err}");
    }
    for r in &report.results {
        println!("{} {}", if r.passed { "ok  " } else { "FAIL" }, r.describe());
    }
    let failed = report.results.iter().filter(|r| !r.passed).count();
    println!("{} of {} assertions passed", report.results.len() - failed, report.results.len());
    Ok(if report.passed { EXIT_OK } else { EXIT_DOMAIN })
}

fn cmd_deploy(ctx: &Context, args: &DeployArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.file).map_err(|e| UsageError(format!("{}: {e}", args.file.display())))?;
    let config = parse_config(&text).map_err(|e| UsageError(format!("{}: {e}", args.file.display())))?;
    let (backend, workloads) = ctx
        .backend(&args.backend)?
        .ok_or_else(|| UsageError("no cluster model configured (use --cluster)".into()))?;
    let deployment = match backend.deploy(&config, &args.system) {
        Ok(d) => d,
        Err(e) => {
            println!("deployment failed: {e}");
            return Ok(EXIT_DOMAIN);
        }
    };
    print!("{}", deployment.outcome.logs);
    if !deployment.outcome.logs.ends_with('\n') && !deployment.outcome.logs.is_empty() {
        println!();
    }
    if !deployment.outcome.success {
        println!(
            "deployment failed: {}",
            deployment.outcome.failure_reason.as_deref().unwrap_or("unknown reason")
        );
        return Ok(EXIT_DOMAIN);
    }
    if let Some(workload) = workloads.get(&args.system) {
        match backend.benchmark(&deployment, workload) {
            Ok(b) => println!(
                "completion_seconds: {:.3}\ncost_dollars: {:.7}",
                b.completion_seconds, b.cost_dollars
            ),
            Err(e) => {
                println!("benchmark failed: {e}");
                return Ok(EXIT_DOMAIN);
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ResolutionReport {
    profile: String,
    cases: usize,
    curve: Vec<f64>,
}

fn cmd_chain(ctx: &Context, args: &ChainArgs) -> CmdResult {
    let (cases, dir) = ctx.dataset()?;
    let profile = ctx.profile(args.profile, args.max_attempts)?;
    let provider = ctx.provider(Some(load_case_scripts(&dir)?))?;
    let shots = ctx.shots()?;
    let index = ctx.index(std::slice::from_ref(&profile))?;
    let backend = if args.static_only { None } else { ctx.backend(&args.backend)? };

    let transcripts = ctx.output_dir().join("transcripts").join(profile.name.as_str());
    let mut points = Vec::new();
    for case in &cases {
        let mut deps = ChainDeps::new(provider.as_ref(), &shots);
        deps.index = index.as_ref();
        deps.retrieval_k = ctx.app.retrieval.top_k;
        deps.assertions = &case.assertions;
        if let Some((backend, workloads)) = &backend {
            deps.deployer = Some(backend.as_ref());
            deps.workload = workloads.get(&case.system).copied();
        }
        let outcome = run_chain(&case.id, &case.request(), &profile, &deps)?;
        write_transcript(&transcripts.join(format!("{}.jsonl", transcript_name(&case.id))), &outcome)?;
        println!(
            "{}: {} in {} attempt(s)",
            case.id,
            if outcome.resolved { "resolved" } else { "unresolved" },
            outcome.attempts_used
        );
        points.push(ResolutionPoint::from(&outcome));
    }
    let curve = resolution_curve_points(&points)?;
    let report = ResolutionReport {
        profile: profile.name.to_string(),
        cases: cases.len(),
        curve,
    };
    write_file(&ctx.output_dir().join("resolution.json"), &to_json(&report))?;
    println!("{}", render_curve(&report.curve));
    Ok(EXIT_OK)
}

fn render_curve(curve: &[f64]) -> String {
    curve
        .iter()
        .enumerate()
        .map(|(k, v)| format!("resolved by attempt {}: {v:.2}%", k + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn cmd_bench(ctx: &Context, args: &BenchArgs) -> CmdResult {
    let (cases, dir) = ctx.dataset()?;
    let names = if args.profiles.is_empty() {
        ProfileName::ALL.to_vec()
    } else {
        args.profiles.clone()
    };
    let profiles = names
        .iter()
        .map(|n| ctx.profile(Some(*n), args.max_attempts))
        .collect::<Result<Vec<_>, _>>()?;
    let provider = ctx.provider(Some(load_case_scripts(&dir)?))?;
    let shots = ctx.shots()?;
    let index = ctx.index(&profiles)?;
    let mut deps = EvalDeps::new(provider.as_ref(), &shots);
    deps.index = index.as_ref();
    deps.retrieval_k = ctx.app.retrieval.top_k;
    deps.jobs = ctx.app.jobs;

    let report_dir = args.report_dir.clone().unwrap_or_else(|| ctx.output_dir().to_path_buf());
    let report = run_static_eval(&cases, &profiles, &deps)?;
    let text = report.render_text();
    write_file(&report_dir.join("accuracy.json"), &to_json(&report))?;
    write_file(&report_dir.join("accuracy.txt"), &text)?;
    print!("{text}");

    if args.dynamic {
        let (backend, workloads) = ctx
            .backend(&BackendArgs {
                deploy_backend: BackendKind::Simulator,
                kubectl: String::new(),
                kube_context: None,
                real_cluster: false,
            })?
            .ok_or_else(|| UsageError("dynamic evaluation needs a cluster model (use --cluster)".into()))?;
        let intents: Vec<String> = if args.intents.is_empty() {
            DEFAULT_INTENTS.iter().map(|s| s.to_string()).collect()
        } else {
            args.intents.clone()
        };
        for profile in &profiles {
            let dynamic = run_dynamic_eval(&cases, profile, &intents, &deps, backend.as_ref(), &workloads)?;
            let stem = format!("dynamic-{}", profile.name);
            write_file(&report_dir.join(format!("{stem}.json")), &to_json(&dynamic))?;
            write_file(&report_dir.join(format!("{stem}.txt")), &dynamic.to_string())?;
            println!("\nDynamic evaluation ({})\n{dynamic}", profile.name);
        }
    }
    Ok(EXIT_OK)
}

fn expand_patterns(patterns: &[String]) -> Result<Vec<PathBuf>, UsageError> {
    let mut files = Vec::new();
    for pattern in patterns {
        let literal = Path::new(pattern);
        if literal.is_file() {
            files.push(literal.to_path_buf());
            continue;
        }
        let matches = glob::glob(pattern).map_err(|e| UsageError(format!("bad pattern {pattern:?}: {e}")))?;
        for entry in matches {
            let path = entry.map_err(|e| UsageError(e.to_string()))?;
            if path.is_file() {
                files.push(path);
            }
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn cmd_complexity(args: &ComplexityArgs) -> CmdResult {
    let files = expand_patterns(&args.patterns)?;
    if files.is_empty() {
        return Err(UsageError(format!("no files match {}", args.patterns.join(" "))));
    }
    let mut configs = Vec::new();
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        configs.push(parse_config(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?);
    }
    let aggregate = aggregate_complexity(&configs)?;
    if args.json {
        print!("{}", to_json(&aggregate));
    } else {
        print!("{aggregate}");
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TranscriptReport {
    transcripts: usize,
    cost: CostReport,
    latency: Vec<LatencyRow>,
    resolution_curve: Vec<f64>,
}

fn transcript_files(dir: &Path) -> Result<Vec<PathBuf>, UsageError> {
    if !dir.is_dir() {
        return Err(UsageError(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "jsonl") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn record_from_lines(file: &Path, lines: &[TranscriptLine], rate: f64) -> CostRecord {
    let first = &lines[0];
    let calls = lines.iter().flat_map(|l| l.record.calls.iter());
    let prompt: u64 = calls.clone().map(|c| c.prompt_tokens).sum();
    let completion: u64 = calls.clone().map(|c| c.completion_tokens).sum();
    let id = if first.scenario.is_empty() {
        file.display().to_string()
    } else {
        first.scenario.clone()
    };
    let mut record = CostRecord::new(&id, &first.system, prompt, completion, rate);
    record.attempts = lines.last().map_or(0, |l| l.record.attempt);
    record.latency_seconds = calls.map(|c| c.latency_seconds).collect();
    record
}

fn cmd_report(ctx: &Context, args: &ReportArgs) -> CmdResult {
    let dir = args
        .transcripts
        .clone()
        .unwrap_or_else(|| ctx.output_dir().join("transcripts"));
    let rate = args.rate.unwrap_or(ctx.app.rate_per_token);
    let files = transcript_files(&dir)?;
    let mut records = Vec::new();
    let mut points = Vec::new();
    for file in &files {
        let lines = read_transcript(file).map_err(|e| UsageError(format!("{}: {e}", file.display())))?;
        let Some(last) = lines.last() else { continue };
        points.push(ResolutionPoint {
            resolved: last.record.passed,
            attempts_used: last.record.attempt,
            max_attempts: last.max_attempts,
        });
        records.push(record_from_lines(file, &lines, rate));
    }
    if records.is_empty() {
        return Err(UsageError(format!("no transcripts under {}", dir.display())));
    }
    let report = TranscriptReport {
        transcripts: records.len(),
        cost: cost_report(&records, rate)?,
        latency: latency_report(&records),
        resolution_curve: resolution_curve_points(&points)?,
    };
    let mut text = format!("{}\nLatency per call (s)\n", report.cost);
    for row in &report.latency {
        text.push_str(&format!("{row}\n"));
    }
    text.push_str(&format!("\n{}\n", render_curve(&report.resolution_curve)));
    write_file(&ctx.output_dir().join("report.json"), &to_json(&report))?;
    write_file(&ctx.output_dir().join("report.txt"), &text)?;
    print!("{text}");
    Ok(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = Context::new(&cli).and_then(|ctx| match &cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Validate(a) => cmd_validate(a),
        Command::Deploy(a) => cmd_deploy(&ctx, a),
        Command::Chain(a) => cmd_chain(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::Report(a) => cmd_report(&ctx, a),
    });
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
