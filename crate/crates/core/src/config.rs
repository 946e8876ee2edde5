//! In-memory configuration tree shared by the validators, the deployer and
//! the reports.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A leaf value. Integers and reals are kept apart so that `replicas: 2` and
/// `replicas: 2.0` stay distinguishable in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Null,
    Bool(bool),
    Integer(i64),
    Real(f64),
    String(String),
}

impl Scalar {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Integer(i) => Some(*i as f64),
            Scalar::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Scalar::Integer(_) | Scalar::Real(_))
    }

    /// Text form used for mapping keys and quantity parsing.
    pub fn to_plain_string(&self) -> String {
        match self {
            Scalar::Null => "null".to_string(),
            Scalar::Bool(b) => b.to_string(),
            Scalar::Integer(i) => i.to_string(),
            Scalar::Real(r) => r.to_string(),
            Scalar::String(s) => s.clone(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::String(s) => write!(f, "{s:?}"),
            other => f.write_str(&other.to_plain_string()),
        }
    }
}

/// One node of a configuration tree. Mappings keep their source order and
/// never hold duplicate keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Mapping(Vec<(String, Node)>),
    Sequence(Vec<Node>),
    Scalar(Scalar),
}

impl Node {
    pub fn get(&self, key: &str) -> Option<&Node> {
        match self {
            Node::Mapping(entries) => entries.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<&Scalar> {
        match self {
            Node::Scalar(s) => Some(s),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::Mapping(_) => "mapping",
            Node::Sequence(_) => "sequence",
            Node::Scalar(_) => "scalar",
        }
    }

    pub(crate) fn to_yaml_value(&self) -> serde_yaml::Value {
        use serde_yaml::Value;
        match self {
            Node::Mapping(entries) => {
                let mut map = serde_yaml::Mapping::with_capacity(entries.len());
                for (k, v) in entries {
                    map.insert(Value::String(k.clone()), v.to_yaml_value());
                }
                Value::Mapping(map)
            }
            Node::Sequence(items) => Value::Sequence(items.iter().map(Node::to_yaml_value).collect()),
            Node::Scalar(Scalar::Null) => Value::Null,
            Node::Scalar(Scalar::Bool(b)) => Value::Bool(*b),
            Node::Scalar(Scalar::Integer(i)) => Value::Number((*i).into()),
            Node::Scalar(Scalar::Real(r)) => Value::Number((*r).into()),
            Node::Scalar(Scalar::String(s)) => Value::String(s.clone()),
        }
    }

    /// Converts a parsed YAML value, rejecting non-scalar keys and keys that
    /// collide once stringified (`1:` next to `'1':`).
    pub(crate) fn from_yaml_value(value: serde_yaml::Value) -> Result<Node, String> {
        use serde_yaml::Value;
        Ok(match value {
            Value::Null => Node::Scalar(Scalar::Null),
            Value::Bool(b) => Node::Scalar(Scalar::Bool(b)),
            Value::Number(n) => Node::Scalar(match n.as_i64() {
                Some(i) => Scalar::Integer(i),
                None => Scalar::Real(n.as_f64().unwrap_or(f64::NAN)),
            }),
            Value::String(s) => Node::Scalar(Scalar::String(s)),
            Value::Sequence(items) => Node::Sequence(
                items
                    .into_iter()
                    .map(Node::from_yaml_value)
                    .collect::<Result<_, _>>()?,
            ),
            Value::Mapping(map) => {
                let mut entries: Vec<(String, Node)> = Vec::with_capacity(map.len());
                for (k, v) in map {
                    let key = match Node::from_yaml_value(k)? {
                        Node::Scalar(s) => s.to_plain_string(),
                        other => return Err(format!("{} used as a mapping key", other.kind_name())),
                    };
                    if entries.iter().any(|(existing, _)| *existing == key) {
                        return Err(format!("duplicate entry with key {key:?}"));
                    }
                    entries.push((key, Node::from_yaml_value(v)?));
                }
                Node::Mapping(entries)
            }
            Value::Tagged(tagged) => Node::from_yaml_value(tagged.value)?,
        })
    }
}

/// A parsed configuration whose root is always a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    pub root: Node,
    /// The YAML text the tree was parsed from, comments included.
    pub source_text: String,
}

impl ConfigDocument {
    /// Canonical block-style YAML with two-space indentation.
    pub fn to_yaml(&self) -> String {
        serialize_node(&self.root)
    }
}

pub fn serialize_node(node: &Node) -> String {
    // Serializing a `serde_yaml::Value` built from our own tree cannot fail.
    serde_yaml::to_string(&node.to_yaml_value()).expect("yaml value serializes")
}
