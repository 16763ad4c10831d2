//! Per-sentence novelty of n-grams along generation order.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::text::{token_windows, TextError, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversitySeries {
    pub n: usize,
    /// Share of each sentence's distinct n-grams not seen in any earlier
    /// sentence; `None` for sentences with fewer than `n` tokens.
    pub values: Vec<Option<f64>>,
    /// Size of the accumulated n-gram set after each sentence.
    pub cumulative: Vec<usize>,
}

impl DiversitySeries {
    /// `(index, value)` for the sentences that have a value.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i as f64, v)))
            .collect()
    }
}

pub fn diversity_series<'a, I>(sentences: I, n: usize, tok: &TokenizerConfig) -> Result<DiversitySeries, MetricsError>
where
    I: IntoIterator<Item = &'a str>,
{
    if n == 0 {
        return Err(TextError::ZeroOrder.into());
    }
    let mut seen: HashSet<String> = HashSet::new();
    let mut values = Vec::new();
    let mut cumulative = Vec::new();
    for sentence in sentences {
        let tokens = tok.tokens(sentence);
        let grams: HashSet<String> = token_windows(&tokens, n, tok).into_iter().collect();
        if grams.is_empty() {
            values.push(None);
        } else {
            let novel = grams.iter().filter(|g| !seen.contains(*g)).count();
            values.push(Some(novel as f64 / grams.len() as f64));
            seen.extend(grams);
        }
        cumulative.push(seen.len());
    }
    if values.is_empty() {
        return Err(MetricsError::EmptySuite);
    }
    Ok(DiversitySeries { n, values, cumulative })
}
