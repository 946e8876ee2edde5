use std::fmt;

use serde::{Deserialize, Serialize};

use super::ValidationError;
use crate::config::{ConfigDocument, Node};
use crate::stats::{compact, mean_std};

/// Key count and nesting depth of one configuration. Top-level keys sit at
/// depth 1; sequences do not add depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityMetrics {
    pub key_count: usize,
    pub max_depth: usize,
}

fn walk(node: &Node, depth: usize, acc: &mut ComplexityMetrics) {
    match node {
        Node::Mapping(entries) => {
            for (_, value) in entries {
                acc.key_count += 1;
                acc.max_depth = acc.max_depth.max(depth + 1);
                walk(value, depth + 1, acc);
            }
        }
        Node::Sequence(items) => items.iter().for_each(|item| walk(item, depth, acc)),
        Node::Scalar(_) => {}
    }
}

pub fn complexity(config: &ConfigDocument) -> ComplexityMetrics {
    let mut acc = ComplexityMetrics {
        key_count: 0,
        max_depth: 0,
    };
    walk(&config.root, 0, &mut acc);
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityAggregate {
    pub max_keys: usize,
    pub max_depth: usize,
    pub mean_keys: f64,
    pub std_keys: f64,
    pub mean_depth: f64,
    pub std_depth: f64,
}

pub fn aggregate_metrics(metrics: &[ComplexityMetrics]) -> Result<ComplexityAggregate, ValidationError> {
    let keys: Vec<f64> = metrics.iter().map(|m| m.key_count as f64).collect();
    let depths: Vec<f64> = metrics.iter().map(|m| m.max_depth as f64).collect();
    let (mean_keys, std_keys) = mean_std(&keys).ok_or(ValidationError::EmptyCorpus)?;
    let (mean_depth, std_depth) = mean_std(&depths).ok_or(ValidationError::EmptyCorpus)?;
    Ok(ComplexityAggregate {
        max_keys: metrics.iter().map(|m| m.key_count).max().unwrap_or(0),
        max_depth: metrics.iter().map(|m| m.max_depth).max().unwrap_or(0),
        mean_keys,
        std_keys,
        mean_depth,
        std_depth,
    })
}

pub fn aggregate_complexity(configs: &[ConfigDocument]) -> Result<ComplexityAggregate, ValidationError> {
    let metrics: Vec<ComplexityMetrics> = configs.iter().map(complexity).collect();
    aggregate_metrics(&metrics)
}

impl ComplexityAggregate {
    pub const HEADER: [&'static str; 4] = ["Max Keys", "Max Depth", "Avg Keys", "Avg Depth"];

    pub fn row(&self) -> [String; 4] {
        [
            self.max_keys.to_string(),
            self.max_depth.to_string(),
            format!("{} ± {}", compact(self.mean_keys), compact(self.std_keys)),
            format!("{} ± {}", compact(self.mean_depth), compact(self.std_depth)),
        ]
    }
}

impl fmt::Display for ComplexityAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = self.row();
        for (i, h) in Self::HEADER.iter().enumerate() {
            let width = h.chars().count().max(row[i].chars().count());
            write!(f, "{h:<width$}")?;
            f.write_str(if i + 1 < 4 { "  " } else { "\n" })?;
        }
        for (i, cell) in row.iter().enumerate() {
            let width = Self::HEADER[i].chars().count().max(cell.chars().count());
            write!(f, "{cell:<width$}")?;
            f.write_str(if i + 1 < 4 { "  " } else { "\n" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::parse_config;

    fn metrics(text: &str) -> (usize, usize) {
        let m = complexity(&parse_config(text).unwrap());
        (m.key_count, m.max_depth)
    }

    #[test]
    fn hand_counted_fixtures() {
        assert_eq!(metrics("a: 1"), (1, 1));
        assert_eq!(metrics("a:\n  b:\n    c: 1\nd: 2"), (4, 3));
        assert_eq!(metrics("a:\n  - b: 1\n  - c:\n      d: 2"), (4, 3));
        assert_eq!(metrics("{}"), (0, 0));
    }

    #[test]
    fn aggregates() {
        let one = aggregate_metrics(&[ComplexityMetrics { key_count: 1, max_depth: 1 }]).unwrap();
        assert_eq!((one.max_keys, one.max_depth), (1, 1));
        assert_eq!((one.mean_keys, one.std_keys, one.mean_depth, one.std_depth), (1.0, 0.0, 1.0, 0.0));

        let two = aggregate_metrics(&[
            ComplexityMetrics { key_count: 2, max_depth: 1 },
            ComplexityMetrics { key_count: 4, max_depth: 3 },
        ])
        .unwrap();
        assert_eq!((two.max_keys, two.max_depth), (4, 3));
        assert_eq!((two.mean_keys, two.std_keys), (3.0, 1.0));
        assert_eq!((two.mean_depth, two.std_depth), (2.0, 1.0));
        assert_eq!(two.row()[2], "3 ± 1");

        assert_eq!(aggregate_metrics(&[]), Err(ValidationError::EmptyCorpus));
    }
}
