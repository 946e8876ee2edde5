//! Resource quantities: `250m` and `2` for CPU, `512Mi` and `1Gi` for memory.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantityKind {
    /// Parsed to millicores.
    Cpu,
    /// Parsed to bytes.
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {kind} quantity {text:?}: {reason}")]
pub struct QuantityError {
    pub text: String,
    pub kind: &'static str,
    pub reason: String,
}

fn multiplier(kind: QuantityKind, suffix: &str) -> Option<u128> {
    match (kind, suffix) {
        (QuantityKind::Cpu, "") => Some(1000),
        (QuantityKind::Cpu, "m") => Some(1),
        (QuantityKind::Memory, "") => Some(1),
        (QuantityKind::Memory, "Ki") => Some(1 << 10),
        (QuantityKind::Memory, "Mi") => Some(1 << 20),
        (QuantityKind::Memory, "Gi") => Some(1 << 30),
        _ => None,
    }
}

/// Parses `<digits>[.<digits>]<suffix>`. The result must be a whole number
/// of millicores or bytes.
pub fn parse_quantity(text: &str, kind: QuantityKind) -> Result<u64, QuantityError> {
    let err = |reason: &str| QuantityError {
        text: text.to_string(),
        kind: match kind {
            QuantityKind::Cpu => "cpu",
            QuantityKind::Memory => "memory",
        },
        reason: reason.to_string(),
    };
    let s = text.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(s.len());
    let (number, suffix) = s.split_at(split);
    let mult = multiplier(kind, suffix).ok_or_else(|| err(&format!("unknown suffix {suffix:?}")))?;

    let (int_part, frac_part) = match number.split_once('.') {
        Some((i, f)) => (i, f),
        None => (number, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("missing number"));
    }
    if frac_part.contains('.') {
        return Err(err("more than one decimal point"));
    }
    if frac_part.len() > 18 || int_part.len() > 20 {
        return Err(err("too many digits"));
    }
    let int: u128 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err("bad number"))? };
    let frac: u128 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| err("bad number"))? };
    let scale = 10u128.pow(frac_part.len() as u32);
    let scaled = (int * scale + frac)
        .checked_mul(mult)
        .ok_or_else(|| err("value too large"))?;
    if scaled % scale != 0 {
        return Err(err(match kind {
            QuantityKind::Cpu => "finer than one millicore",
            QuantityKind::Memory => "fractional bytes",
        }));
    }
    u64::try_from(scaled / scale).map_err(|_| err("value too large"))
}

/// Formats bytes with the largest exact binary suffix.
pub fn format_memory(bytes: u64) -> String {
    for (suffix, shift) in [("Gi", 30), ("Mi", 20), ("Ki", 10)] {
        if bytes != 0 && bytes.is_multiple_of(1u64 << shift) {
            return format!("{}{suffix}", bytes >> shift);
        }
    }
    bytes.to_string()
}

pub fn format_cpu(millicores: u64) -> String {
    if millicores.is_multiple_of(1000) {
        (millicores / 1000).to_string()
    } else {
        format!("{millicores}m")
    }
}
