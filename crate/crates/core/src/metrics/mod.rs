//! Pass rates and their uncertainty.
//!
//! A [`Sample`] is the list of pass/fail bits of one system on one property,
//! each labelled with the property value of its test case. The plain pass
//! rate averages the bits; the macro pass rate first averages within each
//! property value and then across values, so frequent values do not dominate.
//!
//! Confidence intervals use the percentile bootstrap over test cases: each
//! resample draws `N` cases with replacement and recomputes the macro pass
//! rate. Values that a resample happens to miss entirely drop out of that
//! resample's average. Resample `k` is driven by its own PCG stream seeded
//! with `seed ^ k`, so the distribution is identical whether resamples run
//! serially or in parallel.

mod diversity;
mod paired;
mod trend;

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diversity::{diversity_series, DiversitySeries};
pub use paired::{paired_bootstrap, PairedOutcome, Winner};
pub use trend::{trend_fit, trend_fit_points, trend_value};

use crate::text::TextError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty sample")]
    EmptySample,
    #[error("invalid resampling config: {0}")]
    InvalidConfig(String),
    #[error("paired samples do not cover the same cases: {0}")]
    Mismatched(String),
    #[error("cannot fit degree {degree} polynomial to {points} points")]
    Underdetermined { points: usize, degree: usize },
    #[error("empty suite")]
    EmptySuite,
    #[error(transparent)]
    Text(#[from] TextError),
}

/// Pass/fail bits labelled by property value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    values: Vec<String>,
    group: Vec<u32>,
    pass: Vec<bool>,
}

impl Sample {
    pub fn new<I, S>(entries: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (S, bool)>,
        S: AsRef<str>,
    {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut values = Vec::new();
        let mut group = Vec::new();
        let mut pass = Vec::new();
        for (value, bit) in entries {
            let value = value.as_ref();
            let id = match index.get(value) {
                Some(id) => *id,
                None => {
                    let id = values.len() as u32;
                    index.insert(value.to_string(), id);
                    values.push(value.to_string());
                    id
                }
            };
            group.push(id);
            pass.push(bit);
        }
        if pass.is_empty() {
            return Err(MetricsError::EmptySample);
        }
        Ok(Sample { values, group, pass })
    }

    /// All entries share one property value.
    pub fn single_value(bits: impl IntoIterator<Item = bool>) -> Result<Self, MetricsError> {
        Self::new(bits.into_iter().map(|b| ("", b)))
    }

    pub fn len(&self) -> usize {
        self.pass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pass.is_empty()
    }

    /// Number of distinct property values.
    pub fn value_count(&self) -> usize {
        self.values.len()
    }

    pub fn value_of(&self, i: usize) -> &str {
        &self.values[self.group[i] as usize]
    }

    pub fn passes(&self) -> usize {
        self.pass.iter().filter(|b| **b).count()
    }

    /// Per-value `(value, bits)` in first-seen order.
    pub fn groups(&self) -> Vec<(&str, Vec<bool>)> {
        let mut out: Vec<(&str, Vec<bool>)> = self.values.iter().map(|v| (v.as_str(), Vec::new())).collect();
        for (g, b) in self.group.iter().zip(&self.pass) {
            out[*g as usize].1.push(*b);
        }
        out
    }

    fn tally(&self, indices: impl Iterator<Item = usize>, n: &mut [u32], p: &mut [u32]) {
        n.fill(0);
        p.fill(0);
        for i in indices {
            let g = self.group[i] as usize;
            n[g] += 1;
            p[g] += self.pass[i] as u32;
        }
    }
}

/// Macro average over groups with at least one entry.
fn macro_from_counts(n: &[u32], p: &[u32]) -> f64 {
    let mut sum = 0.0;
    let mut groups = 0u32;
    for (ni, pi) in n.iter().zip(p) {
        if *ni > 0 {
            sum += *pi as f64 / *ni as f64;
            groups += 1;
        }
    }
    sum / groups as f64
}

/// Mean of the pass bits.
pub fn pass_rate(s: &Sample) -> f64 {
    s.passes() as f64 / s.len() as f64
}

/// Mean over property values of the per-value pass rate.
pub fn macro_pass_rate(s: &Sample) -> f64 {
    let mut n = vec![0; s.value_count()];
    let mut p = vec![0; s.value_count()];
    s.tally(0..s.len(), &mut n, &mut p);
    macro_from_counts(&n, &p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            k: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.k < 1 {
            return Err(MetricsError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MetricsError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub(crate) fn resample_rng(seed: u64, k: usize) -> Pcg64 {
    Pcg64::seed_from_u64(seed ^ k as u64)
}

/// Macro pass rate of each of the `cfg.k` resamples, in resample order.
pub fn bootstrap_distribution(s: &Sample, cfg: &ResampleConfig) -> Result<Vec<f64>, MetricsError> {
    cfg.validate()?;
    let n = s.len();
    let groups = s.value_count();
    Ok((0..cfg.k)
        .into_par_iter()
        .map_init(
            || (vec![0u32; groups], vec![0u32; groups]),
            |(counts, passes), k| {
                let mut rng = resample_rng(cfg.seed, k);
                s.tally((0..n).map(|_| rng.random_range(0..n)), counts, passes);
                macro_from_counts(counts, passes)
            },
        )
        .collect())
}

/// Percentile of sorted data with linear interpolation between order
/// statistics, `q` in `[0, 1]`.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval for the macro pass rate at level `1 - alpha`.
pub fn bootstrap_ci(s: &Sample, cfg: &ResampleConfig) -> Result<Interval, MetricsError> {
    if s.len() < 2 {
        log::warn!("bootstrap interval from a sample of {} case", s.len());
    }
    let mut dist = bootstrap_distribution(s, cfg)?;
    dist.sort_by(f64::total_cmp);
    Ok(Interval {
        lo: percentile_linear(&dist, cfg.alpha / 2.0),
        hi: percentile_linear(&dist, 1.0 - cfg.alpha / 2.0),
    })
}
