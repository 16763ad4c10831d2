//! Per-property reports: macro pass rate with a bootstrap interval for each
//! system, and paired comparisons between every pair of systems.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::detection::DetectorConfig;
use crate::metrics::{bootstrap_ci, macro_pass_rate, paired_bootstrap, pass_rate, ResampleConfig, Sample, Winner};
use crate::model::{DetectorKind, TestCase, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system_id: String,
    pub mpr: f64,
    pub pr: f64,
    pub ci: [f64; 2],
    pub n: usize,
    /// Distinct property values among the `n` cases.
    pub values: usize,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub passes: usize,
    pub fails: usize,
    /// Cases without a verdict for this system (failed translation).
    pub untranslated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// System id of the winner; `null` when the resamples split evenly.
    pub winner: Option<String>,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub suite_sha256: String,
    pub candidates_sha256: String,
    pub detector: DetectorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub property_id: String,
    pub detector_kind: DetectorKind,
    /// Cases judged for every system; statistics use exactly these.
    pub n: usize,
    /// Suite cases left out because some system failed to translate them.
    pub excluded: usize,
    /// Suite cases left out because their value has no candidates.
    #[serde(default)]
    pub no_candidates: usize,
    pub systems: Vec<SystemReport>,
    pub comparisons: Vec<Comparison>,
    pub metadata: ReportMetadata,
}

/// Summarizes verdicts of one property.
///
/// Every system is scored on the same cases: those with a verdict for all
/// systems, in suite order.
pub fn build_report(
    property_id: &str,
    detector_kind: DetectorKind,
    cases: &[TestCase],
    verdicts: &[(String, Vec<Verdict>)],
    stats: &ResampleConfig,
    metadata: ReportMetadata,
) -> Result<SuiteReport, RunError> {
    let mut seen = HashSet::new();
    let mut by_system: Vec<HashMap<&str, bool>> = Vec::with_capacity(verdicts.len());
    for (system, vs) in verdicts {
        if vs.is_empty() {
            return Err(RunError::NoVerdicts(system.clone()));
        }
        if !seen.insert(system.as_str()) {
            return Err(RunError::DuplicateSystem(system.clone()));
        }
        by_system.push(vs.iter().map(|v| (v.case_id.as_str(), v.pass)).collect());
    }
    let common: Vec<&TestCase> = cases
        .iter()
        .filter(|c| by_system.iter().all(|m| m.contains_key(c.id.as_str())))
        .collect();
    if common.is_empty() {
        return Err(RunError::EmptySuite);
    }

    let mut samples = Vec::with_capacity(verdicts.len());
    let mut systems = Vec::with_capacity(verdicts.len());
    for ((system, vs), passes) in verdicts.iter().zip(&by_system) {
        let sample = Sample::new(common.iter().map(|c| (c.value.as_str(), passes[c.id.as_str()])))?;
        let ci = bootstrap_ci(&sample, stats)?;
        let n_pass = sample.passes();
        systems.push(SystemReport {
            system_id: system.clone(),
            mpr: macro_pass_rate(&sample),
            pr: pass_rate(&sample),
            ci: [ci.lo, ci.hi],
            n: sample.len(),
            values: sample.value_count(),
            k: stats.k,
            alpha: stats.alpha,
            seed: stats.seed,
            passes: n_pass,
            fails: sample.len() - n_pass,
            untranslated: cases.len().saturating_sub(vs.len()),
        });
        samples.push(sample);
    }

    let mut comparisons = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            comparisons.push(paired(&verdicts[i].0, &samples[i], &verdicts[j].0, &samples[j], stats)?);
        }
    }

    Ok(SuiteReport {
        property_id: property_id.to_string(),
        detector_kind,
        n: common.len(),
        excluded: cases.len() - common.len(),
        no_candidates: 0,
        systems,
        comparisons,
        metadata,
    })
}

fn paired(a: &str, sa: &Sample, b: &str, sb: &Sample, stats: &ResampleConfig) -> Result<Comparison, RunError> {
    let out = paired_bootstrap(sa, sb, stats)?;
    Ok(Comparison {
        a: a.to_string(),
        b: b.to_string(),
        winner: match out.winner {
            Winner::A => Some(a.to_string()),
            Winner::B => Some(b.to_string()),
            Winner::Tie => None,
        },
        p_value: out.p_value,
        significant: out.significant,
    })
}

/// Paired comparison of two systems on the cases both have verdicts for.
/// `a` and `b` may name the same system.
pub fn compare_systems(
    cases: &[TestCase],
    a: (&str, &[Verdict]),
    b: (&str, &[Verdict]),
    stats: &ResampleConfig,
) -> Result<Comparison, RunError> {
    let ma: HashMap<&str, bool> = a.1.iter().map(|v| (v.case_id.as_str(), v.pass)).collect();
    let mb: HashMap<&str, bool> = b.1.iter().map(|v| (v.case_id.as_str(), v.pass)).collect();
    let common: Vec<&TestCase> = cases
        .iter()
        .filter(|c| ma.contains_key(c.id.as_str()) && mb.contains_key(c.id.as_str()))
        .collect();
    if common.is_empty() {
        return Err(RunError::EmptySuite);
    }
    let sa = Sample::new(common.iter().map(|c| (c.value.as_str(), ma[c.id.as_str()])))?;
    let sb = Sample::new(common.iter().map(|c| (c.value.as_str(), mb[c.id.as_str()])))?;
    paired(a.0, &sa, b.0, &sb, stats)
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub properties: Vec<SuiteReport>,
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            line.extend(std::iter::repeat_n(' ', widths[c] - cell.chars().count()));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Properties as rows, systems as columns, each cell the interval
/// `[lo, hi]` to three decimals.
pub fn render_table(reports: &[SuiteReport]) -> String {
    let mut systems: Vec<&str> = Vec::new();
    for r in reports {
        for s in &r.systems {
            if !systems.contains(&s.system_id.as_str()) {
                systems.push(&s.system_id);
            }
        }
    }
    let mut rows = vec![std::iter::once("Property".to_string())
        .chain(systems.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()];
    for r in reports {
        let mut row = vec![r.property_id.clone()];
        for s in &systems {
            row.push(match r.systems.iter().find(|x| x.system_id == *s) {
                Some(x) => format!("[{:.3}, {:.3}]", x.ci[0], x.ci[1]),
                None => "-".into(),
            });
        }
        rows.push(row);
    }
    let mut out = String::from("Macro pass rate intervals\n\n");
    out.push_str(&pad_table(&rows));
    for r in reports {
        if r.excluded > 0 {
            let _ = writeln!(
                out,
                "\n{}: {} cases excluded after failed translations",
                r.property_id, r.excluded
            );
        }
    }
    out
}

/// `Model A  Model B  Winner  p-value` rows; ties show `-` as winner.
pub fn render_comparisons(comparisons: &[Comparison]) -> String {
    let mut rows = vec![vec![
        "Model A".to_string(),
        "Model B".into(),
        "Winner".into(),
        "p-value".into(),
        String::new(),
    ]];
    for c in comparisons {
        rows.push(vec![
            c.a.clone(),
            c.b.clone(),
            c.winner.clone().unwrap_or_else(|| "-".into()),
            format!("{:.3}", c.p_value),
            if c.significant {
                "significant"
            } else {
                "not significant"
            }
            .into(),
        ]);
    }
    pad_table(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ReportMetadata {
        ReportMetadata {
            suite_sha256: String::new(),
            candidates_sha256: String::new(),
            detector: DetectorConfig::default(),
        }
    }

    fn cases(n: usize) -> Vec<TestCase> {
        (0..n)
            .map(|i| TestCase::from_raw(format!("c{i}"), "p", format!("Value [v{}] here.", i % 4)).unwrap())
            .collect()
    }

    fn verdicts(system: &str, cases: &[TestCase], pass: impl Fn(usize) -> bool) -> (String, Vec<Verdict>) {
        let vs = cases
            .iter()
            .enumerate()
            .map(|(i, c)| Verdict {
                case_id: c.id.clone(),
                system_id: system.into(),
                pass: pass(i),
                matched_candidate: None,
                scores: None,
            })
            .collect();
        (system.to_string(), vs)
    }

    #[test]
    fn all_pass_single_system() {
        let cs = cases(20);
        let r = build_report(
            "p",
            DetectorKind::Exhaustive,
            &cs,
            &[verdicts("s", &cs, |_| true)],
            &ResampleConfig::default(),
            meta(),
        )
        .unwrap();
        assert_eq!(r.systems[0].mpr, 1.0);
        assert_eq!(r.systems[0].ci, [1.0, 1.0]);
        assert!(r.comparisons.is_empty());
    }

    #[test]
    fn identical_systems_tie() {
        let cs = cases(30);
        let v = [verdicts("a", &cs, |i| i % 3 == 0), verdicts("b", &cs, |i| i % 3 == 0)];
        let r = build_report(
            "p",
            DetectorKind::Exhaustive,
            &cs,
            &v,
            &ResampleConfig::default(),
            meta(),
        )
        .unwrap();
        assert_eq!(r.comparisons[0].p_value, 0.5);
        assert_eq!(r.comparisons[0].winner, None);
        assert!(!r.comparisons[0].significant);
        assert!(render_comparisons(&r.comparisons).contains("not significant"));
    }

    #[test]
    fn three_systems_three_comparisons() {
        let cs = cases(12);
        let v = [
            verdicts("a", &cs, |_| true),
            verdicts("b", &cs, |i| i % 2 == 0),
            verdicts("c", &cs, |_| false),
        ];
        let r = build_report(
            "p",
            DetectorKind::Exhaustive,
            &cs,
            &v,
            &ResampleConfig::default(),
            meta(),
        )
        .unwrap();
        assert_eq!(r.comparisons.len(), 3);
        assert_eq!(r.comparisons[1].winner.as_deref(), Some("a"));
    }

    #[test]
    fn systems_share_the_case_set() {
        let cs = cases(10);
        let (a, mut va) = verdicts("a", &cs, |_| true);
        va.remove(3);
        let v = [(a, va), verdicts("b", &cs, |_| true)];
        let r = build_report(
            "p",
            DetectorKind::Exhaustive,
            &cs,
            &v,
            &ResampleConfig::default(),
            meta(),
        )
        .unwrap();
        assert_eq!(r.n, 9);
        assert_eq!(r.excluded, 1);
        assert!(r.systems.iter().all(|s| s.n == 9));
        assert_eq!(r.systems[0].untranslated, 1);
    }

    #[test]
    fn self_comparison_ties() {
        let cs = cases(16);
        let (_, v) = verdicts("a", &cs, |i| i % 2 == 0);
        let c = compare_systems(&cs, ("a", &v), ("a", &v), &ResampleConfig::default()).unwrap();
        assert_eq!((c.p_value, c.winner, c.significant), (0.5, None, false));
    }

    #[test]
    fn empty_system_is_an_error() {
        let cs = cases(3);
        assert!(matches!(
            build_report(
                "p",
                DetectorKind::Exhaustive,
                &cs,
                &[("s".into(), vec![])],
                &ResampleConfig::default(),
                meta()
            ),
            Err(RunError::NoVerdicts(_))
        ));
    }

    #[test]
    fn table_layout() {
        let cs = cases(8);
        let r = build_report(
            "names",
            DetectorKind::Exhaustive,
            &cs,
            &[verdicts("echo", &cs, |_| true)],
            &ResampleConfig::default(),
            meta(),
        )
        .unwrap();
        let t = render_table(&[r]);
        assert!(t.contains("Property  echo"));
        assert!(t.contains("names     [1.000, 1.000]"));
    }
}
