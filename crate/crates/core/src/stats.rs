//! Small numeric helpers shared by the reports.

/// Population mean and standard deviation. `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Fixed two decimals with trailing zeros trimmed: `3.00 -> 3`, `5.50 -> 5.5`.
pub fn compact(value: f64) -> String {
    trimmed_fixed(value, 2)
}

/// `value` with `decimals` places, trailing zeros and a bare point removed.
pub fn trimmed_fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        &s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
