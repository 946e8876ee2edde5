mod common;

use common::{
    check_chain_invariants, dask_assertions, fixture, suite_fix_attempt, suite_id, suite_script, GOOD_REPLY,
    SUITE_SIZE,
};
use lads::chain::{read_transcript, run_chain, write_transcript, ChainDeps, ChainOutcome, Stage};
use lads::deploy::{ClusterFile, ClusterModel, NodeCapacity, Simulator};
use lads::eval::resolution_curve;
use lads::gateway::{MockProvider, MockScript};
use lads::prompt::{GenerationRequest, OptimizationProfile, ProfileName, ShotLibrary};
use proptest::prelude::*;

fn request() -> GenerationRequest {
    GenerationRequest::new("dask", "Deploy a dask cluster with two workers.", "low cost and resource consumption")
}

fn cluster() -> ClusterFile {
    ClusterFile::load(&fixture("cluster.yaml")).unwrap()
}

#[test]
fn passes_first_time() {
    let provider = MockProvider::new(MockScript::new(GOOD_REPLY));
    let shots = ShotLibrary::new();
    let assertions = dask_assertions();
    let file = cluster();
    let sim = Simulator::new(file.model.clone());
    let deps = ChainDeps {
        assertions: &assertions,
        deployer: Some(&sim),
        workload: Some(file.workloads["dask"]),
        ..ChainDeps::new(&provider, &shots)
    };
    let outcome = run_chain("ok", &request(), &OptimizationProfile::preset(ProfileName::Ip), &deps).unwrap();
    assert!(outcome.resolved);
    assert_eq!(outcome.attempts_used, 1);
    let last = outcome.last_attempt().unwrap();
    assert_eq!(
        last.stages,
        vec![Stage::Generation, Stage::Structural, Stage::StaticValidation, Stage::Deployment, Stage::RuntimeBenchmark]
    );
    assert!(outcome.benchmark().is_some());
    check_chain_invariants(&outcome).unwrap();
}

#[test]
fn static_failure_fixed_on_second_attempt() {
    let script = MockScript::new("nothing").with_replies(
        "missing-key",
        ["worker:\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 4Gi", GOOD_REPLY],
    );
    let provider = MockProvider::new(script);
    let shots = ShotLibrary::new();
    let assertions = dask_assertions();
    let deps = ChainDeps {
        assertions: &assertions,
        ..ChainDeps::new(&provider, &shots)
    };
    let outcome = run_chain("missing-key", &request(), &OptimizationProfile::preset(ProfileName::Ip), &deps).unwrap();
    assert!(outcome.resolved);
    assert_eq!(outcome.attempts_used, 2);
    let fb = outcome.attempt_history[0].feedback.as_ref().unwrap();
    assert_eq!(fb.failed_stage, Stage::StaticValidation);
    assert!(fb.summary.starts_with("StaticValidation failed after Structural succeeded due to 1 of 3 assertions failing"));
    for line in &fb.filtered_lines {
        assert!(outcome.attempt_history[1].prompt.contains(line.as_str()));
    }
    check_chain_invariants(&outcome).unwrap();
}

#[test]
fn deployment_feedback_mentions_insufficient_memory() {
    let big = "worker:\n  replicas: 1\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 64Gi";
    let fixed = "worker:\n  replicas: 2\n  resources:\n    limits:\n      cpu: \"1\"\n      memory: 8Gi";
    let provider = MockProvider::new(MockScript::new("nothing").with_replies("oom", [big, fixed]));
    let shots = ShotLibrary::new();
    let assertions: Vec<lads::validation::Assertion> =
        serde_yaml::from_str("- { path: worker/resources/limits/memory, kind: exists }").unwrap();
    let sim = Simulator::new(
        ClusterModel::new(vec![NodeCapacity {
            cpu_millicores: 4000,
            memory_bytes: 16 << 30,
        }])
        .unwrap(),
    );
    let deps = ChainDeps {
        assertions: &assertions,
        deployer: Some(&sim),
        ..ChainDeps::new(&provider, &shots)
    };
    let outcome = run_chain("oom", &request(), &OptimizationProfile::preset(ProfileName::Ip), &deps).unwrap();
    assert!(outcome.resolved);
    assert_eq!(outcome.attempts_used, 2);
    let fb = outcome.attempt_history[0].feedback.as_ref().unwrap();
    assert_eq!(fb.summary, "Deployment failed after StaticValidation succeeded due to insufficient memory");
    assert!(fb.filtered_lines[0].starts_with("ERROR replica 0 unschedulable: insufficient memory"));
    check_chain_invariants(&outcome).unwrap();
}

#[test]
fn cot_substitutes_for_missing_assertions() {
    let script = MockScript::new(GOOD_REPLY).with_replies(
        "cot/verify",
        ["VERDICT: MISALIGNED: two workers is too many for a low-cost intent", "VERDICT: ALIGNED"],
    );
    let provider = MockProvider::new(script);
    let shots = ShotLibrary::new();
    let deps = ChainDeps::new(&provider, &shots);
    let outcome = run_chain("cot", &request(), &OptimizationProfile::preset(ProfileName::Cot), &deps).unwrap();
    assert!(outcome.resolved);
    let first = &outcome.attempt_history[0];
    assert_eq!(first.stages, vec![Stage::Generation, Stage::Structural, Stage::CoTVerification]);
    assert_eq!(
        first.feedback.as_ref().unwrap().summary,
        "CoTVerification failed after Structural succeeded due to misalignment with the user intent: two workers is too many for a low-cost intent"
    );
    assert_eq!(outcome.calls().filter(|c| c.kind == "verify").count(), 2);
    check_chain_invariants(&outcome).unwrap();
}

#[test]
fn provider_failure_aborts() {
    struct Down;
    impl lads::gateway::ChatProvider for Down {
        fn name(&self) -> &str {
            "down"
        }
        fn call(
            &self,
            _: &lads::gateway::PromptPayload,
            _: &lads::gateway::SamplingParams,
        ) -> Result<lads::gateway::RawResponse, lads::gateway::GatewayError> {
            Err(lads::gateway::GatewayError::ProviderUnreachable("connection refused".into()))
        }
    }
    let shots = ShotLibrary::new();
    let deps = ChainDeps::new(&Down, &shots);
    let outcome = run_chain("down", &request(), &OptimizationProfile::preset(ProfileName::Ip), &deps).unwrap();
    assert!(!outcome.resolved);
    assert_eq!(outcome.attempts_used, 1);
    assert!(outcome.attempt_history[0].error.as_deref().unwrap().contains("connection refused"));
    check_chain_invariants(&outcome).unwrap();
}

fn run_suite(max_attempts: u32) -> Vec<ChainOutcome> {
    let provider = MockProvider::new(suite_script(max_attempts));
    let shots = ShotLibrary::new();
    let assertions = dask_assertions();
    let file = cluster();
    let sim = Simulator::new(file.model.clone());
    let deps = ChainDeps {
        assertions: &assertions,
        deployer: Some(&sim),
        workload: Some(file.workloads["dask"]),
        ..ChainDeps::new(&provider, &shots)
    };
    let profile = OptimizationProfile::preset(ProfileName::Cot).with_max_attempts(max_attempts);
    (0..SUITE_SIZE)
        .map(|i| run_chain(&suite_id(i), &request(), &profile, &deps).unwrap())
        .collect()
}

#[test]
fn scenario_suite_curve_and_invariants() {
    let outcomes = run_suite(3);
    for (i, o) in outcomes.iter().enumerate() {
        check_chain_invariants(o).unwrap();
        assert_eq!(o.resolved.then_some(o.attempts_used), suite_fix_attempt(i), "{}", o.scenario);
    }
    assert_eq!(resolution_curve(&outcomes).unwrap(), vec![32.0, 64.0, 94.0]);
    let failed: std::collections::BTreeSet<Stage> = outcomes
        .iter()
        .flat_map(|o| o.attempt_history.iter().filter_map(|r| r.feedback.as_ref().map(|f| f.failed_stage)))
        .collect();
    assert_eq!(
        failed.into_iter().collect::<Vec<_>>(),
        vec![Stage::Structural, Stage::StaticValidation, Stage::CoTVerification, Stage::Deployment]
    );
}

#[test]
fn replay_is_deterministic_and_transcripts_round_trip() {
    let a = run_suite(3);
    let b = run_suite(3);
    let dir = tempfile::tempdir().unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(serde_json::to_string(x).unwrap(), serde_json::to_string(y).unwrap());
    }
    let path = dir.path().join("t.jsonl");
    write_transcript(&path, &a[2]).unwrap();
    let lines = read_transcript(&path).unwrap();
    assert_eq!(lines.len(), a[2].attempt_history.len());
    for (line, record) in lines.iter().zip(&a[2].attempt_history) {
        assert_eq!(&line.record, record);
        assert_eq!(line.scenario, a[2].scenario);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Arbitrary scripts of good and failing replies never break the
    /// invariants, whatever the budget.
    #[test]
    fn invariants_hold_for_any_script(kinds in prop::collection::vec(0usize..5, 1..7), budget in 1u32..7) {
        let replies: Vec<&str> = kinds.iter().map(|&k| if k == 4 { GOOD_REPLY } else { common::bad_reply(k) }).collect();
        let verdicts: Vec<&str> = kinds.iter().map(|&k| if k == 4 { "VERDICT: ALIGNED" } else { common::bad_verdict(k) }).collect();
        let script = MockScript::new("no configuration here")
            .with_replies("p", replies)
            .with_replies("p/verify", verdicts);
        let provider = MockProvider::new(script);
        let shots = ShotLibrary::new();
        let assertions = dask_assertions();
        let file = cluster();
        let sim = Simulator::new(file.model.clone());
        let deps = ChainDeps {
            assertions: &assertions,
            deployer: Some(&sim),
            workload: Some(file.workloads["dask"]),
            ..ChainDeps::new(&provider, &shots)
        };
        let profile = OptimizationProfile::preset(ProfileName::Cot).with_max_attempts(budget);
        let outcome = run_chain("p", &request(), &profile, &deps).unwrap();
        check_chain_invariants(&outcome).map_err(TestCaseError::fail)?;
        let first_good = kinds.iter().position(|&k| k == 4).map(|p| p as u32 + 1);
        prop_assert_eq!(outcome.resolved, first_good.is_some_and(|g| g <= budget));
    }
}
