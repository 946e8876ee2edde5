use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ValidationError;
use crate::config::{ConfigDocument, Node};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Key(String),
    Index(usize),
    Wildcard,
}

/// Slash-separated path: `worker/resources/limits/cpu`, `spec/groups/[0]/replicas`,
/// `workers/*/memory`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConfigPath {
    raw: String,
    segments: Vec<Segment>,
}

impl ConfigPath {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }
}

impl FromStr for ConfigPath {
    type Err = ValidationError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ValidationError::PathSyntax {
            path: raw.to_string(),
            reason: reason.to_string(),
        };
        if raw.is_empty() {
            return Err(err("empty path"));
        }
        let segments = raw
            .split('/')
            .map(|seg| {
                if seg.is_empty() {
                    return Err(err("empty segment"));
                }
                if seg == "*" {
                    return Ok(Segment::Wildcard);
                }
                if let Some(rest) = seg.strip_prefix('[') {
                    let inner = rest.strip_suffix(']').ok_or_else(|| err("unclosed index bracket"))?;
                    if inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(err("index must be a non-negative integer"));
                    }
                    return inner
                        .parse()
                        .map(Segment::Index)
                        .map_err(|_| err("index out of range"));
                }
                Ok(Segment::Key(seg.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            raw: raw.to_string(),
            segments,
        })
    }
}

impl TryFrom<String> for ConfigPath {
    type Error = ValidationError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ConfigPath> for String {
    fn from(path: ConfigPath) -> Self {
        path.raw
    }
}

impl fmt::Display for ConfigPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// All nodes under `root` matching `path`, in document order.
pub fn resolve<'a>(root: &'a Node, path: &ConfigPath) -> Vec<&'a Node> {
    let mut current = vec![root];
    for segment in path.segments() {
        let mut next = Vec::new();
        for node in current {
            match (segment, node) {
                (Segment::Key(key), Node::Mapping(_)) => next.extend(node.get(key)),
                (Segment::Index(i), Node::Sequence(items)) => next.extend(items.get(*i)),
                (Segment::Wildcard, Node::Mapping(entries)) => next.extend(entries.iter().map(|(_, v)| v)),
                (Segment::Wildcard, Node::Sequence(items)) => next.extend(items.iter()),
                _ => {}
            }
        }
        current = next;
    }
    current
}

pub fn resolve_path<'a>(config: &'a ConfigDocument, path: &str) -> Result<Vec<&'a Node>, ValidationError> {
    let path: ConfigPath = path.parse()?;
    Ok(resolve(&config.root, &path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scalar;
    use crate::preprocess::parse_config;

    fn ints(nodes: Vec<&Node>) -> Vec<i64> {
        nodes
            .into_iter()
            .map(|n| match n {
                Node::Scalar(Scalar::Integer(i)) => *i,
                other => panic!("not an integer: {other:?}"),
            })
            .collect()
    }

    #[test]
    fn resolves_keys_indices_and_wildcards() {
        let doc = parse_config("a:\n  b: 1\n").unwrap();
        assert_eq!(ints(resolve_path(&doc, "a/b").unwrap()), vec![1]);

        let doc = parse_config("w:\n  - r: 2\n  - r: 3\n").unwrap();
        assert_eq!(ints(resolve_path(&doc, "w/*/r").unwrap()), vec![2, 3]);
        assert_eq!(ints(resolve_path(&doc, "w/[1]/r").unwrap()), vec![3]);
        assert!(resolve_path(&doc, "w/[2]/r").unwrap().is_empty());

        let doc = parse_config("a: 1").unwrap();
        assert!(resolve_path(&doc, "z").unwrap().is_empty());
        // A key segment never matches inside a sequence.
        let doc = parse_config("a: [1, 2]").unwrap();
        assert!(resolve_path(&doc, "a/0").unwrap().is_empty());
    }

    #[test]
    fn wildcard_over_mapping_keeps_document_order() {
        let doc = parse_config("m:\n  z: 1\n  a: 2\n  k: 3\n").unwrap();
        assert_eq!(ints(resolve_path(&doc, "m/*").unwrap()), vec![1, 2, 3]);
    }

    #[test]
    fn malformed_paths() {
        for bad in ["", "a//b", "/a", "a/", "[x]", "[1", "[]", "[-1]"] {
            assert!(
                matches!(bad.parse::<ConfigPath>(), Err(ValidationError::PathSyntax { .. })),
                "{bad:?} should be rejected"
            );
        }
        assert!("distributed.worker/memory-limit".parse::<ConfigPath>().is_ok());
    }
}
