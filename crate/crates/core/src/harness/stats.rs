use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Population standard deviation (divides by `n`).
    pub std: f64,
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty list".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SummaryStats {
        // Guards min <= mean <= max against rounding in the sum.
        mean: mean.clamp(min, max),
        std: var.sqrt(),
        n,
        min,
        max,
    })
}
