use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::chain::ChainOutcome;
use crate::stats::{mean_std, trimmed_fixed};

/// Token and latency accounting for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub case_id: String,
    pub system: String,
    pub attempts: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub dollars: f64,
    /// Latency of every provider call, in call order.
    pub latency_seconds: Vec<f64>,
}

impl CostRecord {
    pub fn new(case_id: &str, system: &str, prompt_tokens: u64, completion_tokens: u64, rate_per_token: f64) -> Self {
        Self {
            case_id: case_id.to_string(),
            system: system.to_string(),
            attempts: 1,
            prompt_tokens,
            completion_tokens,
            dollars: (prompt_tokens + completion_tokens) as f64 * rate_per_token,
            latency_seconds: Vec::new(),
        }
    }

    pub fn from_outcome(outcome: &ChainOutcome, rate_per_token: f64) -> Self {
        let mut record = Self::new(
            &outcome.scenario,
            &outcome.system,
            outcome.prompt_tokens(),
            outcome.completion_tokens(),
            rate_per_token,
        );
        record.attempts = outcome.attempts_used;
        record.latency_seconds = outcome.calls().map(|c| c.latency_seconds).collect();
        record
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub system: String,
    pub max_completion_tokens: u64,
    pub cost_dollars: f64,
    /// `cost_dollars` with seven decimals.
    pub cost_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub rate_per_token: f64,
    pub rows: Vec<CostRow>,
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>22} {:>12}", "System", "Max Tokens (completion)", "Cost ($)")?;
        for r in &self.rows {
            writeln!(f, "{:<10} {:>22} {:>12}", r.system, r.max_completion_tokens, r.cost_text)?;
        }
        Ok(())
    }
}

/// Systems in order of first appearance.
fn systems<'a>(records: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in records {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Per system: the largest completion token count and its price.
pub fn cost_report(records: &[CostRecord], rate_per_token: f64) -> Result<CostReport, EvalError> {
    if !(rate_per_token > 0.0) || !rate_per_token.is_finite() {
        return Err(EvalError::InvalidRate(rate_per_token));
    }
    let rows = systems(records.iter().map(|r| r.system.as_str()))
        .into_iter()
        .map(|system| {
            let max_completion_tokens = records
                .iter()
                .filter(|r| r.system == system)
                .map(|r| r.completion_tokens)
                .max()
                .unwrap_or(0);
            let cost_dollars = max_completion_tokens as f64 * rate_per_token;
            CostRow {
                system: system.to_string(),
                max_completion_tokens,
                cost_dollars,
                cost_text: format!("{cost_dollars:.7}"),
            }
        })
        .collect();
    Ok(CostReport { rate_per_token, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub system: String,
    pub calls: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

impl fmt::Display for LatencyRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ± {}",
            self.system,
            trimmed_fixed(self.mean_seconds, 3),
            trimmed_fixed(self.std_seconds, 3)
        )
    }
}

/// Per system mean and population std over every call latency. Systems
/// without any recorded call are left out.
pub fn latency_report(records: &[CostRecord]) -> Vec<LatencyRow> {
    systems(records.iter().map(|r| r.system.as_str()))
        .into_iter()
        .filter_map(|system| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.system == system)
                .flat_map(|r| r.latency_seconds.iter().copied())
                .collect();
            let (mean_seconds, std_seconds) = mean_std(&values)?;
            Some(LatencyRow {
                system: system.to_string(),
                calls: values.len(),
                mean_seconds,
                std_seconds,
            })
        })
        .collect()
}
