use std::fmt;

use serde::{Deserialize, Serialize};

use super::path::{resolve, ConfigPath};
use super::ValidationError;
use crate::config::{ConfigDocument, Node, Scalar};

const REAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

impl Comparator {
    fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
        }
    }

    fn holds(self, observed: &Scalar, expected: &Scalar) -> bool {
        if let (Scalar::Integer(a), Scalar::Integer(b)) = (observed, expected) {
            return match self {
                Comparator::Ge => a >= b,
                Comparator::Le => a <= b,
                Comparator::Eq => a == b,
            };
        }
        let (Some(a), Some(b)) = (observed.as_f64(), expected.as_f64()) else {
            return false;
        };
        match self {
            Comparator::Ge => a >= b - REAL_TOLERANCE,
            Comparator::Le => a <= b + REAL_TOLERANCE,
            Comparator::Eq => (a - b).abs() <= REAL_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    Exists,
    Absent,
    Equals(Scalar),
    /// Expected value is always numeric.
    Compare(Comparator, Scalar),
    Length(usize),
}

/// One declarative check. On disk:
///
/// ```yaml
/// - { path: worker/replicas, kind: compare, expected: ">= 2" }
/// - { path: scheduler/name, kind: equals, expected: dask-scheduler }
/// - { path: debug, kind: absent }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AssertionSpec", into = "AssertionSpec")]
pub struct Assertion {
    pub path: ConfigPath,
    pub check: Check,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertionSpec {
    path: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected: Option<Scalar>,
}

fn parse_comparison(text: &str) -> Result<(Comparator, Scalar), ValidationError> {
    let text = text.trim();
    let ops = [
        (">=", Comparator::Ge),
        ("≥", Comparator::Ge),
        ("<=", Comparator::Le),
        ("≤", Comparator::Le),
        ("==", Comparator::Eq),
        ("=", Comparator::Eq),
    ];
    let (op, rest) = ops
        .iter()
        .find_map(|(sym, op)| text.strip_prefix(sym).map(|rest| (*op, rest.trim())))
        .ok_or_else(|| ValidationError::InvalidAssertion(format!("comparison {text:?} lacks >=, <= or =")))?;
    let value = if let Ok(i) = rest.parse::<i64>() {
        Scalar::Integer(i)
    } else if let Ok(r) = rest.parse::<f64>() {
        Scalar::Real(r)
    } else {
        return Err(ValidationError::InvalidAssertion(format!(
            "comparison operand {rest:?} is not numeric"
        )));
    };
    Ok((op, value))
}

impl TryFrom<AssertionSpec> for Assertion {
    type Error = ValidationError;

    fn try_from(spec: AssertionSpec) -> Result<Self, Self::Error> {
        let path: ConfigPath = spec.path.parse()?;
        let missing = || ValidationError::InvalidAssertion(format!("{} on {path} needs `expected`", spec.kind));
        let check = match spec.kind.to_ascii_lowercase().as_str() {
            "exists" => Check::Exists,
            "absent" => Check::Absent,
            "equals" => Check::Equals(spec.expected.clone().ok_or_else(missing)?),
            "compare" => match spec.expected.clone().ok_or_else(missing)? {
                Scalar::String(s) => {
                    let (op, v) = parse_comparison(&s)?;
                    Check::Compare(op, v)
                }
                other => {
                    return Err(ValidationError::InvalidAssertion(format!(
                        "compare expects a string like \">= 2\", got {other}"
                    )))
                }
            },
            "length" => match spec.expected.clone().ok_or_else(missing)? {
                Scalar::Integer(n) if n >= 0 => Check::Length(n as usize),
                other => {
                    return Err(ValidationError::InvalidAssertion(format!(
                        "length expects a non-negative integer, got {other}"
                    )))
                }
            },
            other => return Err(ValidationError::InvalidAssertion(format!("unknown kind {other:?}"))),
        };
        Ok(Assertion { path, check })
    }
}

impl From<Assertion> for AssertionSpec {
    fn from(a: Assertion) -> Self {
        let (kind, expected) = match a.check {
            Check::Exists => ("exists", None),
            Check::Absent => ("absent", None),
            Check::Equals(v) => ("equals", Some(v)),
            Check::Compare(op, v) => (
                "compare",
                Some(Scalar::String(format!("{} {}", op.symbol(), v.to_plain_string()))),
            ),
            Check::Length(n) => ("length", Some(Scalar::Integer(n as i64))),
        };
        AssertionSpec {
            path: a.path.into(),
            kind: kind.to_string(),
            expected,
        }
    }
}

impl Assertion {
    pub fn new(path: &str, check: Check) -> Result<Self, ValidationError> {
        if let Check::Compare(_, v) = &check {
            if !v.is_numeric() {
                return Err(ValidationError::InvalidAssertion("compare needs a numeric operand".into()));
            }
        }
        Ok(Self {
            path: path.parse()?,
            check,
        })
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.check {
            Check::Exists => write!(f, "exists {}", self.path),
            Check::Absent => write!(f, "absent {}", self.path),
            Check::Equals(v) => write!(f, "equals {} {}", self.path, v),
            Check::Compare(op, v) => write!(f, "compare {} {} {}", self.path, op.symbol(), v),
            Check::Length(n) => write!(f, "length {} {}", self.path, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    NoMatch,
    UnexpectedMatch,
    ValueMismatch,
    TypeMismatch,
    LengthMismatch,
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub assertion: Assertion,
    pub passed: bool,
    /// Rendered matched values; empty when nothing matched.
    pub observed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
}

impl AssertionResult {
    /// One-line description used in feedback and reports.
    pub fn describe(&self) -> String {
        let observed = if self.observed.is_empty() {
            "no match".to_string()
        } else {
            format!("observed {}", self.observed.join(", "))
        };
        match self.reason {
            Some(reason) => format!("{} ({reason:?}; {observed})", self.assertion),
            None => format!("{} ({observed})", self.assertion),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub case_id: String,
    pub structural_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_error: Option<String>,
    pub results: Vec<AssertionResult>,
    pub passed: bool,
}

impl ValidationReport {
    /// Report for output that never became a configuration: every
    /// assertion fails.
    pub fn structural_failure(case_id: &str, assertions: &[Assertion], error: impl fmt::Display) -> Self {
        Self {
            case_id: case_id.to_string(),
            structural_ok: false,
            structural_error: Some(error.to_string()),
            results: assertions
                .iter()
                .map(|a| AssertionResult {
                    assertion: a.clone(),
                    passed: false,
                    observed: Vec::new(),
                    reason: Some(FailureReason::Structural),
                })
                .collect(),
            passed: false,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssertionResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

fn render(node: &Node) -> String {
    match node {
        Node::Scalar(s) => s.to_string(),
        Node::Mapping(entries) => format!("<mapping of {}>", entries.len()),
        Node::Sequence(items) => format!("<sequence of {}>", items.len()),
    }
}

fn scalar_equals(observed: &Scalar, expected: &Scalar) -> bool {
    if observed.is_numeric() && expected.is_numeric() {
        return Comparator::Eq.holds(observed, expected);
    }
    observed == expected
}

fn check_one(assertion: &Assertion, root: &Node) -> AssertionResult {
    let matches = resolve(root, &assertion.path);
    let observed: Vec<String> = matches.iter().map(|n| render(n)).collect();
    let fail = |reason| Some(reason);
    let reason = match &assertion.check {
        Check::Exists => matches.is_empty().then_some(FailureReason::NoMatch),
        Check::Absent => (!matches.is_empty()).then_some(FailureReason::UnexpectedMatch),
        _ if matches.is_empty() => fail(FailureReason::NoMatch),
        Check::Equals(expected) => {
            let all = matches
                .iter()
                .all(|n| n.as_scalar().is_some_and(|s| scalar_equals(s, expected)));
            (!all).then_some(FailureReason::ValueMismatch)
        }
        Check::Compare(op, expected) => {
            if matches.iter().any(|n| !n.as_scalar().is_some_and(Scalar::is_numeric)) {
                fail(FailureReason::TypeMismatch)
            } else {
                let all = matches
                    .iter()
                    .filter_map(|n| n.as_scalar())
                    .all(|s| op.holds(s, expected));
                (!all).then_some(FailureReason::ValueMismatch)
            }
        }
        Check::Length(n) => {
            let lengths: Option<Vec<usize>> = matches
                .iter()
                .map(|node| match node {
                    Node::Mapping(e) => Some(e.len()),
                    Node::Sequence(i) => Some(i.len()),
                    Node::Scalar(_) => None,
                })
                .collect();
            match lengths {
                None => fail(FailureReason::TypeMismatch),
                Some(ls) if ls.iter().all(|l| l == n) => None,
                Some(_) => fail(FailureReason::LengthMismatch),
            }
        }
    };
    AssertionResult {
        assertion: assertion.clone(),
        passed: reason.is_none(),
        observed,
        reason,
    }
}

/// Runs every assertion against `config`.
pub fn evaluate(case_id: &str, config: &ConfigDocument, assertions: &[Assertion]) -> ValidationReport {
    let results: Vec<AssertionResult> = assertions.iter().map(|a| check_one(a, &config.root)).collect();
    let passed = results.iter().all(|r| r.passed);
    ValidationReport {
        case_id: case_id.to_string(),
        structural_ok: true,
        structural_error: None,
        results,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::parse_config;

    fn doc(text: &str) -> ConfigDocument {
        parse_config(text).unwrap()
    }

    fn assertion(yaml: &str) -> Assertion {
        serde_yaml::from_str(yaml).unwrap()
    }

    #[test]
    fn compare_and_equals() {
        let d = doc("replicas: 2");
        let ge = Assertion::new("replicas", Check::Compare(Comparator::Ge, Scalar::Integer(2))).unwrap();
        assert!(evaluate("c", &d, &[ge]).passed);

        let eq = Assertion::new("replicas", Check::Equals(Scalar::Integer(3))).unwrap();
        let report = evaluate("c", &d, &[eq]);
        assert!(!report.passed);
        assert_eq!(report.results[0].observed, vec!["2"]);
        assert_eq!(report.results[0].reason, Some(FailureReason::ValueMismatch));
    }

    #[test]
    fn vacuous_absence() {
        let d = doc("{}");
        let a = Assertion::new("debug", Check::Absent).unwrap();
        assert!(evaluate("c", &d, &[a]).passed);
    }

    #[test]
    fn compare_on_string_is_type_mismatch() {
        let d = doc("memory: 512Mi");
        let a = assertion("{path: memory, kind: compare, expected: '<= 1024'}");
        let r = evaluate("c", &d, &[a]);
        assert_eq!(r.results[0].reason, Some(FailureReason::TypeMismatch));
    }

    #[test]
    fn wildcards_require_every_match() {
        let d = doc("w:\n  - r: 2\n  - r: 3\n");
        let all_ge2 = assertion("{path: w/*/r, kind: compare, expected: '>= 2'}");
        let all_eq2 = assertion("{path: w/*/r, kind: equals, expected: 2}");
        let r = evaluate("c", &d, &[all_ge2, all_eq2]);
        assert!(r.results[0].passed);
        assert!(!r.results[1].passed);
    }

    #[test]
    fn numeric_tolerance() {
        let d = doc("ratio: 0.30000000000000004\ncount: 3");
        let a = assertion("{path: ratio, kind: equals, expected: 0.3}");
        let b = assertion("{path: count, kind: equals, expected: 3.0}");
        let c = assertion("{path: ratio, kind: compare, expected: '= 0.3'}");
        assert!(evaluate("c", &d, &[a, b, c]).passed);
    }

    #[test]
    fn length_checks() {
        let d = doc("env: [a, b, c]\nlabels: {x: 1}\nname: n");
        let ok = assertion("{path: env, kind: length, expected: 3}");
        let map = assertion("{path: labels, kind: length, expected: 1}");
        let scalar = assertion("{path: name, kind: length, expected: 1}");
        let r = evaluate("c", &d, &[ok, map, scalar]);
        assert!(r.results[0].passed && r.results[1].passed);
        assert_eq!(r.results[2].reason, Some(FailureReason::TypeMismatch));
    }

    #[test]
    fn structural_failure_fails_everything() {
        let a = Assertion::new("replicas", Check::Exists).unwrap();
        let r = ValidationReport::structural_failure("c", &[a], "no yaml");
        assert!(!r.passed && !r.structural_ok);
        assert_eq!(r.results[0].reason, Some(FailureReason::Structural));
    }

    #[test]
    fn spec_round_trips_through_yaml() {
        let a = assertion("{path: worker/replicas, kind: compare, expected: '≥ 2'}");
        assert_eq!(a.check, Check::Compare(Comparator::Ge, Scalar::Integer(2)));
        let text = serde_yaml::to_string(&a).unwrap();
        assert_eq!(serde_yaml::from_str::<Assertion>(&text).unwrap(), a);
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            "{path: a, kind: equals}",
            "{path: a, kind: compare, expected: 2}",
            "{path: a, kind: compare, expected: '> 2'}",
            "{path: a, kind: length, expected: -1}",
            "{path: a, kind: matches, expected: x}",
            "{path: 'a//b', kind: exists}",
        ] {
            assert!(serde_yaml::from_str::<Assertion>(bad).is_err(), "{bad}");
        }
    }
}
