//! Cleaning of raw model output into a configuration tree.
//!
//! Models wrap the configuration in prose, reasoning and code fences. The
//! extractor picks one YAML candidate out of that text; the parser then
//! turns it into a [`ConfigDocument`] or a [`StructuralError`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigDocument, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuralErrorKind {
    NoYamlFound,
    ParseFailure,
    MultipleDocumentsAmbiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum StructuralError {
    #[error("no YAML mapping found in model output")]
    NoYamlFound,
    #[error("YAML parse failure{}: {detail}", location_suffix(*.line, *.column))]
    ParseFailure {
        detail: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error("{documents} non-empty YAML documents in one stream")]
    MultipleDocumentsAmbiguous { documents: usize },
}

fn location_suffix(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l} column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl StructuralError {
    pub fn kind(&self) -> StructuralErrorKind {
        match self {
            StructuralError::NoYamlFound => StructuralErrorKind::NoYamlFound,
            StructuralError::ParseFailure { .. } => StructuralErrorKind::ParseFailure,
            StructuralError::MultipleDocumentsAmbiguous { .. } => {
                StructuralErrorKind::MultipleDocumentsAmbiguous
            }
        }
    }

    fn parse(detail: impl Into<String>) -> Self {
        StructuralError::ParseFailure {
            detail: detail.into(),
            line: None,
            column: None,
        }
    }
}

/// Parses YAML text into a configuration whose root must be a mapping.
///
/// Streams with several documents are accepted only when all but one are
/// empty.
pub fn parse_config(text: &str) -> Result<ConfigDocument, StructuralError> {
    use serde::Deserialize as _;

    let mut documents = Vec::new();
    for de in serde_yaml::Deserializer::from_str(text) {
        match serde_yaml::Value::deserialize(de) {
            Ok(serde_yaml::Value::Null) => {}
            Ok(value) => documents.push(value),
            Err(err) => return Err(yaml_error(text, &err)),
        }
    }
    if documents.len() > 1 {
        return Err(StructuralError::MultipleDocumentsAmbiguous {
            documents: documents.len(),
        });
    }
    let value = documents
        .pop()
        .ok_or_else(|| StructuralError::parse("empty document"))?;
    let root = Node::from_yaml_value(value).map_err(StructuralError::parse)?;
    if !matches!(root, Node::Mapping(_)) {
        return Err(StructuralError::parse(format!(
            "root is a {}, expected a mapping",
            root.kind_name()
        )));
    }
    Ok(ConfigDocument {
        root,
        source_text: text.to_string(),
    })
}

fn yaml_error(text: &str, err: &serde_yaml::Error) -> StructuralError {
    let detail = err.to_string();
    let (line, column) = match err.location() {
        Some(loc) => {
            // End-of-input errors are reported one line past the text; pin
            // them to the last line instead.
            let lines: Vec<&str> = text.lines().collect();
            if loc.line() > lines.len() && !lines.is_empty() {
                let last = lines.len();
                (Some(last), Some(lines[last - 1].chars().count() + 1))
            } else {
                (Some(loc.line()), Some(loc.column()))
            }
        }
        None => (None, None),
    };
    StructuralError::ParseFailure {
        detail,
        line,
        column,
    }
}

fn is_candidate(text: &str) -> bool {
    parse_config(text).is_ok()
}

/// Bodies of the fenced code blocks in `raw`, in order. An unterminated
/// fence runs to the end of the text.
pub fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match current.as_mut() {
            None if is_fence => current = Some(Vec::new()),
            None => {}
            Some(_) if is_fence => blocks.push(current.take().unwrap_or_default().join("\n")),
            Some(body) => body.push(line),
        }
    }
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    blocks
}

/// Picks the YAML configuration out of raw model output.
///
/// Text that already parses is returned as is. Otherwise the first fenced
/// block with a mapping root wins; failing that, the longest contiguous run
/// of lines that parses as a mapping, earliest first on ties.
pub fn extract_config_text(raw: &str) -> Result<String, StructuralError> {
    if raw.trim().is_empty() {
        return Err(StructuralError::NoYamlFound);
    }
    if is_candidate(raw) {
        return Ok(raw.to_string());
    }
    if let Some(body) = fenced_blocks(raw).into_iter().find(|b| is_candidate(b)) {
        return Ok(body);
    }

    let lines: Vec<&str> = raw.lines().collect();
    let n = lines.len();
    for len in (1..=n).rev() {
        for start in 0..=n - len {
            let end = start + len;
            if lines[start].trim().is_empty() || lines[end - 1].trim().is_empty() {
                continue;
            }
            let span = lines[start..end].join("\n");
            if is_candidate(&span) {
                return Ok(span);
            }
        }
    }
    Err(StructuralError::NoYamlFound)
}

/// Extraction followed by parsing.
pub fn preprocess(raw: &str) -> Result<ConfigDocument, StructuralError> {
    let text = extract_config_text(raw)?;
    parse_config(&text)
}
