//! Paired bootstrap comparison of two systems on the same cases.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{macro_from_counts, resample_rng, MetricsError, ResampleConfig, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    A,
    B,
    Tie,
}

impl Winner {
    pub fn swapped(self) -> Self {
        match self {
            Winner::A => Winner::B,
            Winner::B => Winner::A,
            Winner::Tie => Winner::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub winner: Winner,
    /// `1 - wins_of_winner / k`, with tied resamples credited half to each side.
    pub p_value: f64,
    pub significant: bool,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub k: usize,
}

/// Resamples case indices jointly and counts how often each system has the
/// higher macro pass rate.
///
/// Both samples must list the same cases in the same order; value labels
/// are compared position by position.
pub fn paired_bootstrap(a: &Sample, b: &Sample, cfg: &ResampleConfig) -> Result<PairedOutcome, MetricsError> {
    cfg.validate()?;
    if a.len() != b.len() {
        return Err(MetricsError::Mismatched(format!(
            "{} cases vs {} cases",
            a.len(),
            b.len()
        )));
    }
    if let Some(i) = (0..a.len()).find(|&i| a.value_of(i) != b.value_of(i)) {
        return Err(MetricsError::Mismatched(format!(
            "entry {i} has value {:?} vs {:?}",
            a.value_of(i),
            b.value_of(i)
        )));
    }

    let n = a.len();
    let (ga, gb) = (a.value_count(), b.value_count());
    let deltas: Vec<f64> = (0..cfg.k)
        .into_par_iter()
        .map_init(
            || {
                (
                    Vec::with_capacity(n),
                    vec![0u32; ga],
                    vec![0u32; ga],
                    vec![0u32; gb],
                    vec![0u32; gb],
                )
            },
            |(picks, na, pa, nb, pb), k| {
                let mut rng = resample_rng(cfg.seed, k);
                picks.clear();
                picks.extend((0..n).map(|_| rng.random_range(0..n)));
                a.tally(picks.iter().copied(), na, pa);
                b.tally(picks.iter().copied(), nb, pb);
                macro_from_counts(na, pa) - macro_from_counts(nb, pb)
            },
        )
        .collect();

    let wins_a = deltas.iter().filter(|d| **d > 0.0).count();
    let wins_b = deltas.iter().filter(|d| **d < 0.0).count();
    let ties = cfg.k - wins_a - wins_b;
    let half = ties as f64 / 2.0;
    let (score_a, score_b) = (wins_a as f64 + half, wins_b as f64 + half);
    let winner = if score_a > score_b {
        Winner::A
    } else if score_b > score_a {
        Winner::B
    } else {
        Winner::Tie
    };
    let p_value = 1.0 - score_a.max(score_b) / cfg.k as f64;
    Ok(PairedOutcome {
        winner,
        p_value,
        significant: p_value < cfg.alpha,
        wins_a,
        wins_b,
        ties,
        k: cfg.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_split_evenly() {
        let s = Sample::new((0..40).map(|i| (format!("v{}", i % 3), i % 2 == 0))).unwrap();
        let out = paired_bootstrap(&s, &s, &ResampleConfig::default()).unwrap();
        assert_eq!(out.p_value, 0.5);
        assert_eq!(out.winner, Winner::Tie);
        assert_eq!(out.ties, 1000);
        assert!(!out.significant);
    }

    #[test]
    fn all_pass_beats_all_fail() {
        let a = Sample::new((0..30).map(|i| (format!("v{i}"), true))).unwrap();
        let b = Sample::new((0..30).map(|i| (format!("v{i}"), false))).unwrap();
        let out = paired_bootstrap(&a, &b, &ResampleConfig::default()).unwrap();
        assert_eq!(out.winner, Winner::A);
        assert_eq!(out.p_value, 0.0);
        assert!(out.significant);
    }

    #[test]
    fn mismatched_cases_rejected() {
        let a = Sample::single_value([true, false]).unwrap();
        let b = Sample::single_value([true]).unwrap();
        assert!(matches!(
            paired_bootstrap(&a, &b, &ResampleConfig::default()),
            Err(MetricsError::Mismatched(_))
        ));
        let c = Sample::new([("x", true), ("y", false)]).unwrap();
        let d = Sample::new([("x", true), ("z", false)]).unwrap();
        assert!(paired_bootstrap(&c, &d, &ResampleConfig::default()).is_err());
    }
}
