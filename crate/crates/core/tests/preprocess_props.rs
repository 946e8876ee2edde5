mod common;

use common::{mapping_strategy, wrap, PROSE, WRAPPERS};
use lads::config::{serialize_node, Node, Scalar};
use lads::preprocess::{extract_config_text, parse_config, preprocess, StructuralError, StructuralErrorKind};
use proptest::prelude::*;

fn is_mapping(text: &str) -> bool {
    matches!(serde_yaml::from_str::<serde_yaml::Value>(text), Ok(serde_yaml::Value::Mapping(_)))
}

/// Line-span scan written independently of the library: the longest span
/// with non-blank first and last lines that parses to a mapping, earliest
/// first on ties.
fn oracle_span(raw: &str) -> Option<String> {
    let lines: Vec<&str> = raw.lines().collect();
    let mut best: Option<(usize, usize)> = None;
    for i in 0..lines.len() {
        for j in i..lines.len() {
            if lines[i].trim().is_empty() || lines[j].trim().is_empty() {
                continue;
            }
            let len = j - i + 1;
            if best.is_some_and(|(a, b)| b - a + 1 >= len) {
                continue;
            }
            if is_mapping(&lines[i..=j].join("\n")) {
                best = Some((i, j));
            }
        }
    }
    best.map(|(i, j)| lines[i..=j].join("\n"))
}

#[test]
fn fixed_examples() {
    let doc = parse_config("a: 1\nb:\n  c: 2").unwrap();
    assert_eq!(
        doc.root,
        Node::Mapping(vec![
            ("a".into(), Node::Scalar(Scalar::Integer(1))),
            ("b".into(), Node::Mapping(vec![("c".into(), Node::Scalar(Scalar::Integer(2)))])),
        ])
    );
    assert_eq!(parse_config("- 1\n- 2").unwrap_err().kind(), StructuralErrorKind::ParseFailure);
    match parse_config("a: [unclosed").unwrap_err() {
        StructuralError::ParseFailure { line, .. } => assert_eq!(line, Some(1)),
        other => panic!("{other:?}"),
    }
    assert_eq!(extract_config_text("replicas: 2").unwrap(), "replicas: 2");
    assert_eq!(
        extract_config_text("Here is your config:\n```yaml\nreplicas: 2\n```\nLet me explain...").unwrap(),
        "replicas: 2"
    );
}

#[test]
fn unfenced_span_between_prose() {
    let yaml: Vec<String> = (0..10).map(|i| format!("key{i}: value{i}")).collect();
    let raw = format!(
        "The request asks for ten settings, listed below.\n\n{}\n\nEach one keeps its default meaning.",
        yaml.join("\n")
    );
    let got = extract_config_text(&raw).unwrap();
    assert_eq!(got, yaml.join("\n"));
    assert_eq!(oracle_span(&raw).unwrap(), got);
}

#[test]
fn declared_errors() {
    assert_eq!(
        preprocess("I cannot help with that request.").unwrap_err().kind(),
        StructuralErrorKind::NoYamlFound
    );
    assert_eq!(
        parse_config("a: 1\n---\nb: 2\n").unwrap_err().kind(),
        StructuralErrorKind::MultipleDocumentsAmbiguous
    );
    assert!(parse_config("---\na: 1\n---\n").is_ok());
    assert_eq!(
        parse_config("a: 1\na: 2").unwrap_err().kind(),
        StructuralErrorKind::ParseFailure
    );
    assert_eq!(
        preprocess("Here you go.\n```yaml\n- only\n- a list\n```").unwrap_err().kind(),
        StructuralErrorKind::NoYamlFound
    );
}

#[test]
fn first_parsable_fence_wins() {
    let raw = "```\nnot: [valid\n```\nthen\n```yaml\nb: 2\n```\n```yaml\nc: 3\n```";
    assert_eq!(extract_config_text(raw).unwrap(), "b: 2");
}

#[test]
fn comments_kept_in_source_dropped_from_tree() {
    let doc = preprocess("```yaml\n# sized for the demo\nreplicas: 2 # two\n```").unwrap();
    assert!(doc.source_text.contains("# sized for the demo"));
    assert_eq!(doc.root, Node::Mapping(vec![("replicas".into(), Node::Scalar(Scalar::Integer(2)))]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn round_trip(root in mapping_strategy()) {
        let text = serialize_node(&root);
        let doc = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&doc.root, &root);
        prop_assert_eq!(serialize_node(&doc.root), text);
    }

    #[test]
    fn wrapped_mapping_is_recovered(root in mapping_strategy(), kind in 0..WRAPPERS, a in 0..4usize, b in 0..4usize) {
        let raw = wrap(kind, &serialize_node(&root), PROSE[a], PROSE[b]);
        let doc = preprocess(&raw).map_err(|e| TestCaseError::fail(format!("{e}\n{raw}")))?;
        prop_assert_eq!(doc.root, root);
    }

    #[test]
    fn extraction_is_idempotent(root in mapping_strategy(), kind in 0..WRAPPERS, a in 0..4usize) {
        let raw = wrap(kind, &serialize_node(&root), PROSE[a], PROSE[3 - a]);
        let once = extract_config_text(&raw).unwrap();
        prop_assert_eq!(extract_config_text(&once).unwrap(), once);
    }

    #[test]
    fn unfenced_extraction_matches_oracle(root in mapping_strategy(), a in 0..4usize, b in 0..4usize) {
        let raw = wrap(5, &serialize_node(&root), PROSE[a], PROSE[b]);
        prop_assert_eq!(extract_config_text(&raw).ok(), oracle_span(&raw));
    }
}
