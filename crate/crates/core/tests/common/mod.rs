//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use lads::config::{Node, Scalar};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn key_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z][a-zA-Z0-9_]{0,8}",
        1 => "[a-z][a-z .:#-]{0,6}[a-z]",
        1 => Just("true".to_string()),
        1 => "[0-9]{1,3}",
    ]
}

pub fn scalar_strategy() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        Just(Scalar::Null),
        any::<bool>().prop_map(Scalar::Bool),
        any::<i64>().prop_map(Scalar::Integer),
        (-1.0e6f64..1.0e6).prop_map(Scalar::Real),
        "[a-zA-Z0-9 _./:#-]{0,12}".prop_map(Scalar::String),
        prop::sample::select(vec!["yes", "null", "1.5", "~", "500m", "1Gi", "0x1F", "- x", "a: b"])
            .prop_map(|s| Scalar::String(s.to_string())),
    ]
}

fn mapping_from(pairs: BTreeMap<String, Node>) -> Node {
    Node::Mapping(pairs.into_iter().collect())
}

/// Arbitrary tree; mappings have unique keys.
pub fn node_strategy() -> impl Strategy<Value = Node> {
    scalar_strategy().prop_map(Node::Scalar).prop_recursive(4, 48, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Node::Sequence),
            prop::collection::btree_map(key_strategy(), inner, 0..5).prop_map(mapping_from),
        ]
    })
}

/// Non-empty mapping root.
pub fn mapping_strategy() -> impl Strategy<Value = Node> {
    prop::collection::btree_map(key_strategy(), node_strategy(), 1..6).prop_map(mapping_from)
}

/// Draws `n` values from `strategy` with a fixed seed.
pub fn sample<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).expect("strategy produces a value").current())
        .collect()
}

/// Prose that never parses as a YAML mapping on any line span.
pub const PROSE: [&str; 4] = [
    "Here is the configuration you asked for.",
    "I kept the defaults where the request said nothing.\nLet me know if anything else is needed.",
    "Sure! This should work on most clusters.",
    "Explanation follows.\n\nThe workers are sized for the stated intent.",
];

/// Ways a model wraps a configuration. Each takes the YAML text.
pub fn wrap(kind: usize, yaml: &str, prose_a: &str, prose_b: &str) -> String {
    let body = yaml.trim_end_matches('\n');
    match kind % 6 {
        0 => body.to_string(),
        1 => format!("```yaml\n{body}\n```"),
        2 => format!("{prose_a}\n```yaml\n{body}\n```\n{prose_b}"),
        3 => format!("{prose_a}\n\n```\n{body}\n```\n\n{prose_b}"),
        4 => format!("{prose_a}\n```yml\n{body}\n```"),
        _ => format!("{prose_a}\n\n{body}\n\n{prose_b}"),
    }
}

pub const WRAPPERS: usize = 6;

/// Naive complexity oracle over `serde_yaml::Value`: counts keys and the
/// deepest key level with an explicit stack.
pub fn oracle_complexity(value: &serde_yaml::Value) -> (usize, usize) {
    let mut keys = 0;
    let mut depth = 0;
    let mut stack = vec![(value, 0usize)];
    while let Some((v, level)) = stack.pop() {
        match v {
            serde_yaml::Value::Mapping(m) => {
                for (_, child) in m {
                    keys += 1;
                    depth = depth.max(level + 1);
                    stack.push((child, level + 1));
                }
            }
            serde_yaml::Value::Sequence(items) => {
                for child in items {
                    stack.push((child, level));
                }
            }
            serde_yaml::Value::Tagged(t) => stack.push((&t.value, level)),
            _ => {}
        }
    }
    (keys, depth)
}

pub fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

use lads::deploy::QuantityKind;

/// Accepted quantities: every suffix of both kinds, with integer, decimal
/// and leading-dot forms.
pub const QUANTITY_OK: &[(&str, QuantityKind, u64)] = &[
    ("250m", QuantityKind::Cpu, 250),
    ("2", QuantityKind::Cpu, 2000),
    ("0", QuantityKind::Cpu, 0),
    ("0.5", QuantityKind::Cpu, 500),
    (".25", QuantityKind::Cpu, 250),
    ("1.5", QuantityKind::Cpu, 1500),
    ("1000m", QuantityKind::Cpu, 1000),
    ("0.001", QuantityKind::Cpu, 1),
    (" 3 ", QuantityKind::Cpu, 3000),
    ("1Gi", QuantityKind::Memory, 1 << 30),
    ("512Mi", QuantityKind::Memory, 512 << 20),
    ("4Ki", QuantityKind::Memory, 4096),
    ("1.5Gi", QuantityKind::Memory, 3 << 29),
    ("0.5Mi", QuantityKind::Memory, 1 << 19),
    ("1024", QuantityKind::Memory, 1024),
    ("0", QuantityKind::Memory, 0),
];

/// Rejected quantities: unknown or misplaced suffixes, malformed numbers,
/// sub-unit precision and overflow.
pub const QUANTITY_BAD: &[(&str, QuantityKind)] = &[
    ("", QuantityKind::Cpu),
    ("m", QuantityKind::Cpu),
    (".", QuantityKind::Cpu),
    ("250M", QuantityKind::Cpu),
    ("2Gi", QuantityKind::Cpu),
    ("1.2.3", QuantityKind::Cpu),
    ("0.5m", QuantityKind::Cpu),
    ("0.0005", QuantityKind::Cpu),
    ("-1", QuantityKind::Cpu),
    ("1 m", QuantityKind::Cpu),
    ("two", QuantityKind::Cpu),
    ("1e3", QuantityKind::Cpu),
    ("1G", QuantityKind::Memory),
    ("1gi", QuantityKind::Memory),
    ("1GiB", QuantityKind::Memory),
    ("100m", QuantityKind::Memory),
    ("1Ti", QuantityKind::Memory),
    ("Mi", QuantityKind::Memory),
    ("0.3", QuantityKind::Memory),
    ("1Ki1", QuantityKind::Memory),
    ("99999999999999999999Gi", QuantityKind::Memory),
];

use lads::chain::{ChainOutcome, Stage};
use lads::gateway::MockScript;
use lads::validation::Assertion;

pub const GOOD_REPLY: &str =
    "```yaml\nworker:\n  replicas: 2\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 4Gi\n```";

/// Failure replies, one per stage they trip on a 2 x (4 cores, 8Gi)
/// cluster with the dask resource assertions: no YAML, too few replicas,
/// a misaligned verdict, and a worker larger than any node.
pub fn bad_reply(kind: usize) -> &'static str {
    match kind % 4 {
        0 => "I am not able to write that configuration.",
        1 => "worker:\n  replicas: 1\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 4Gi",
        2 => "```yaml\nworker:\n  replicas: 3\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 1Gi\n```",
        _ => "```yaml\nworker:\n  replicas: 2\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 16Gi\n```",
    }
}

/// Verdict the verifier returns for the same failure kinds.
pub fn bad_verdict(kind: usize) -> &'static str {
    if kind % 4 == 2 {
        "Three workers exceed the requested budget.\nVERDICT: MISALIGNED: three workers were not requested"
    } else {
        "VERDICT: ALIGNED"
    }
}

pub const SUITE_SIZE: usize = 50;

/// Attempt that first returns a good reply; `None` never does.
pub fn suite_fix_attempt(i: usize) -> Option<u32> {
    (i < 47).then(|| 1 + (i % 3) as u32)
}

pub fn suite_id(i: usize) -> String {
    format!("suite-{i:02}")
}

/// Mock script for the 50-scenario chaining suite.
pub fn suite_script(max_attempts: u32) -> MockScript {
    let mut script = MockScript::new("I have nothing to add.");
    for i in 0..SUITE_SIZE {
        let fix = suite_fix_attempt(i);
        let mut replies = Vec::new();
        let mut verdicts = Vec::new();
        for attempt in 1..=max_attempts {
            if fix.is_some_and(|f| attempt >= f) {
                replies.push(GOOD_REPLY);
                verdicts.push("VERDICT: ALIGNED");
            } else {
                let kind = i + attempt as usize;
                replies.push(bad_reply(kind));
                verdicts.push(bad_verdict(kind));
            }
        }
        let id = suite_id(i);
        script = script
            .with_replies(&id, replies)
            .with_replies(&lads::gateway::mock::verify_scenario(&id), verdicts);
    }
    script
}

pub fn dask_assertions() -> Vec<Assertion> {
    serde_yaml::from_str(&std::fs::read_to_string(fixture("assertions/dask-resources.yaml")).unwrap()).unwrap()
}

/// Stage monotonicity, feedback fidelity, budget and token bookkeeping for
/// one chain. Returns the first violation found.
pub fn check_chain_invariants(outcome: &ChainOutcome) -> Result<(), String> {
    let history = &outcome.attempt_history;
    let fail = |msg: String| Err(format!("{}: {msg}", outcome.scenario));
    if history.is_empty() || history.len() != outcome.attempts_used as usize {
        return fail(format!("{} records for {} attempts", history.len(), outcome.attempts_used));
    }
    if outcome.attempts_used > outcome.max_attempts {
        return fail("attempt budget exceeded".into());
    }
    for (n, record) in history.iter().enumerate() {
        if record.attempt as usize != n + 1 {
            return fail(format!("record {n} numbered {}", record.attempt));
        }
        if record.stages.first() != Some(&Stage::Generation) {
            return fail(format!("attempt {} does not start at generation", record.attempt));
        }
        if record.stages.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("attempt {} stages not increasing: {:?}", record.attempt, record.stages));
        }
        if record.stages.last() != Some(&record.reached_stage) {
            return fail(format!("attempt {} reached stage mismatch", record.attempt));
        }
        let last = n + 1 == history.len();
        if record.passed != record.feedback.is_none() || (record.passed && !last) {
            return fail(format!("attempt {} pass/feedback mismatch", record.attempt));
        }
        if let Some(fb) = &record.feedback {
            if fb.failed_stage != record.reached_stage || !fb.summary.starts_with(&fb.failed_stage.to_string()) {
                return fail(format!("attempt {} feedback names the wrong stage", record.attempt));
            }
            if fb.filtered_lines.is_empty() || fb.filtered_lines.len() > 51 {
                return fail(format!("attempt {} has {} feedback lines", record.attempt, fb.filtered_lines.len()));
            }
            if let Some(next) = history.get(n + 1) {
                let expected = format!("{}\n\n{}", history[0].prompt, fb.render());
                if next.prompt != expected {
                    return fail(format!("attempt {} prompt does not carry the prior feedback", next.attempt));
                }
            }
        }
    }
    let final_passed = history.last().unwrap().passed;
    if outcome.resolved != final_passed || outcome.resolved != outcome.final_config.is_some() {
        return fail("resolution flag disagrees with the last attempt".into());
    }
    let clean_failure = !outcome.resolved && history.iter().all(|r| r.error.is_none());
    if clean_failure && outcome.attempts_used != outcome.max_attempts {
        return fail("unresolved chain stopped before its budget".into());
    }
    let tokens: u64 = history.iter().map(|r| r.total_tokens()).sum();
    if tokens != outcome.total_tokens {
        return fail(format!("token total {} != {}", outcome.total_tokens, tokens));
    }
    Ok(())
}

use lads::eval::{load_case_scripts, load_dataset, run_static_eval, AccuracyTable, EvalDeps};
use lads::gateway::MockProvider;
use lads::prompt::{OptimizationProfile, ProfileName, ShotLibrary};
use lads::retrieval::{load_corpus, RetrievalIndex, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};

/// Cases per level each profile's scripted replies resolve, levels 1 to 6.
pub const SCRIPTED_PASSES: [(&str, [usize; 6]); 5] = [
    ("IP", [7, 6, 5, 4, 2, 1]),
    ("CoT", [8, 7, 5, 4, 3, 2]),
    ("RAG", [8, 7, 6, 5, 3, 2]),
    ("FSL", [9, 8, 7, 6, 4, 3]),
    ("LADS", [10, 10, 9, 8, 7, 6]),
];

pub fn docs_index() -> RetrievalIndex {
    let docs = load_corpus(&fixture("docs")).unwrap();
    RetrievalIndex::build(docs.iter().map(|(id, t)| (id.as_str(), t.as_str())), DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP)
        .unwrap()
}

/// All five profiles over the fixture dataset with its scripted replies.
pub fn fixture_accuracy(jobs: Option<usize>) -> AccuracyTable {
    let root = fixture("dataset");
    let cases = load_dataset(&root).unwrap();
    let provider = MockProvider::new(load_case_scripts(&root).unwrap());
    let shots = ShotLibrary::load(&fixture("shots")).unwrap();
    let index = docs_index();
    let deps = EvalDeps {
        index: Some(&index),
        jobs,
        ..EvalDeps::new(&provider, &shots)
    };
    let profiles: Vec<OptimizationProfile> = ProfileName::ALL.into_iter().map(OptimizationProfile::preset).collect();
    let report = run_static_eval(&cases, &profiles, &deps).unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    report.table
}

/// Every cell of `table` equals ten times the scripted pass count.
pub fn matches_scripted(table: &AccuracyTable) -> Result<(), String> {
    for (profile, passes) in SCRIPTED_PASSES {
        for (i, &n) in passes.iter().enumerate() {
            let level = i as u8 + 1;
            let got = table.cell(profile, level);
            if got != Some(10.0 * n as f64) {
                return Err(format!("{profile} level {level}: {got:?} != {}", 10 * n));
            }
        }
        let total = 100.0 * passes.iter().sum::<usize>() as f64 / 60.0;
        let got = table.total(profile).unwrap_or(f64::NAN);
        if (got - total).abs() > 1e-9 {
            return Err(format!("{profile} total {got} != {total}"));
        }
    }
    Ok(())
}

use std::process::{Command, Output};

/// Runs the `lads` binary.
pub fn lads(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lads"))
        .args(args)
        .env_remove("LADS_CONFIG")
        .output()
        .expect("lads binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The insufficient-memory generate run writing into `out_dir`.
pub fn golden_generate(out_dir: &std::path::Path) -> Output {
    let shots = fixture("shots");
    let cluster = fixture("cluster.yaml");
    let script = fixture("scripts/insufficient-memory.mock.yaml");
    let assertions = fixture("assertions/dask-resources.yaml");
    lads(&[
        "generate",
        "--system",
        "dask",
        "--prompt",
        "Deploy a Dask cluster with two workers.",
        "--intent",
        "Low cost and resource consumption",
        "--profile",
        "FSL",
        "--shots",
        shots.to_str().unwrap(),
        "--cluster",
        cluster.to_str().unwrap(),
        "--mock-script",
        script.to_str().unwrap(),
        "--assertions",
        assertions.to_str().unwrap(),
        "--scenario",
        "insufficient-memory",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ])
}
