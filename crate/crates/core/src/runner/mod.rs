//! End-to-end evaluation: translate a suite through an MT adapter, judge
//! every output with the property's detector, and summarize per system.

pub mod adapters;
pub mod annotate;
pub mod cache;
pub mod report;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapters::{AdapterError, AdapterKind, FileTranslator, SourceItem, SystemAdapter, Translator};
pub use annotate::{
    apply_candidate_edits, review_rows, sample_for_annotation, tally_review, AnnotationSample, AuditEntry,
    CandidateEdit, EditError, ReviewRow, ReviewTally,
};
pub use cache::TranslationCache;
pub use report::{
    build_report, compare_systems, render_comparisons, render_table, Comparison, ReportMetadata, RunReport,
    SuiteReport, SystemReport,
};

use crate::detection::{judge_contrastive, match_exhaustive, DetectError, DetectorConfig, Embedder};
use crate::jsonl::JsonlError;
use crate::metrics::MetricsError;
use crate::model::{CandidateEntry, DetectorKind, ModelError, PropertySpec, TestCase, TranslationRecord, Verdict};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("suite is empty")]
    EmptySuite,
    #[error("property {property}: no candidates for values {values:?} (cases {case_ids:?})")]
    MissingCandidates {
        property: String,
        values: Vec<String>,
        case_ids: Vec<String>,
    },
    #[error("value {value:?}: property uses the {expected} detector but candidates are {found}")]
    DetectorMismatch {
        value: String,
        expected: DetectorKind,
        found: DetectorKind,
    },
    #[error("property {0} uses the contrastive detector but no embedder is configured")]
    NoEmbedder(String),
    #[error("translation for unknown case {0}")]
    UnknownCase(String),
    #[error("case {case_id}: {source}")]
    Detect {
        case_id: String,
        #[source]
        source: DetectError,
    },
    #[error("system {0} has no verdicts")]
    NoVerdicts(String),
    #[error("system {0} appears twice")]
    DuplicateSystem(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// A case that could not be translated; it is left out of the statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub system_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationOutcome {
    /// In suite order, failures omitted.
    pub records: Vec<TranslationRecord>,
    pub failures: Vec<CaseFailure>,
    /// Sentences actually sent to the adapter.
    pub sent: usize,
}

/// Translates marker-free sources, consulting `cache` first.
pub fn translate_all(
    cases: &[TestCase],
    translator: &dyn Translator,
    mut cache: Option<&mut TranslationCache>,
) -> Result<TranslationOutcome, RunError> {
    if cases.is_empty() {
        return Err(RunError::EmptySuite);
    }
    let system = translator.system_id().to_string();
    let use_cache = translator.cacheable();
    let mut results: Vec<Option<Result<String, String>>> = vec![None; cases.len()];
    let mut todo = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let hit = match (&cache, use_cache) {
            (Some(c), true) => c.get(&system, &case.source),
            _ => None,
        };
        match hit {
            Some(t) => results[i] = Some(Ok(t.to_string())),
            None => todo.push(i),
        }
    }
    let items: Vec<SourceItem> = todo
        .iter()
        .map(|&i| SourceItem {
            case_id: &cases[i].id,
            source: &cases[i].source,
        })
        .collect();
    let fresh = if items.is_empty() {
        Vec::new()
    } else {
        translator.translate(&items)
    };
    for (&i, res) in todo.iter().zip(fresh) {
        if let (Ok(t), Some(c), true) = (&res, cache.as_deref_mut(), use_cache) {
            c.insert(&system, &cases[i].source, t)?;
        }
        results[i] = Some(res.map_err(|e| e.to_string()));
    }

    let mut out = TranslationOutcome {
        sent: items.len(),
        ..Default::default()
    };
    for (case, res) in cases.iter().zip(results) {
        match res.expect("every case resolved") {
            Ok(translation) => out.records.push(TranslationRecord {
                case_id: case.id.clone(),
                system_id: system.clone(),
                translation,
            }),
            Err(error) => out.failures.push(CaseFailure {
                case_id: case.id.clone(),
                system_id: system.clone(),
                error,
            }),
        }
    }
    if !out.failures.is_empty() {
        log::warn!(
            "system {system}: {} of {} cases failed to translate and are excluded",
            out.failures.len(),
            cases.len()
        );
    }
    Ok(out)
}

/// Checks that every case's value has a candidate entry and returns the
/// entries keyed by value.
pub fn index_candidates<'a>(
    spec: &PropertySpec,
    cases: &[TestCase],
    candidates: &'a [CandidateEntry],
) -> Result<HashMap<&'a str, &'a CandidateEntry>, RunError> {
    let by_value: HashMap<&str, &CandidateEntry> = candidates.iter().map(|e| (e.value(), e)).collect();
    let mut missing: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for case in cases {
        match by_value.get(case.value.as_str()) {
            None => missing.entry(&case.value).or_default().push(case.id.clone()),
            Some(entry) if entry.kind() != spec.detector => {
                return Err(RunError::DetectorMismatch {
                    value: case.value.clone(),
                    expected: spec.detector,
                    found: entry.kind(),
                })
            }
            Some(_) => {}
        }
    }
    if !missing.is_empty() {
        return Err(RunError::MissingCandidates {
            property: spec.id.clone(),
            values: missing.keys().map(|v| v.to_string()).collect(),
            case_ids: missing.into_values().flatten().collect(),
        });
    }
    Ok(by_value)
}

/// One verdict per translation record, in record order.
pub fn evaluate(
    spec: &PropertySpec,
    cases: &[TestCase],
    candidates: &[CandidateEntry],
    translations: &[TranslationRecord],
    cfg: &DetectorConfig,
    embedder: Option<&dyn Embedder>,
) -> Result<Vec<Verdict>, RunError> {
    let by_value = index_candidates(spec, cases, candidates)?;
    let by_case: HashMap<&str, &TestCase> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    if spec.detector == DetectorKind::Contrastive && embedder.is_none() {
        return Err(RunError::NoEmbedder(spec.id.clone()));
    }
    translations
        .par_iter()
        .map(|rec| {
            let case = by_case
                .get(rec.case_id.as_str())
                .ok_or_else(|| RunError::UnknownCase(rec.case_id.clone()))?;
            let verdict = match by_value[case.value.as_str()] {
                CandidateEntry::Exhaustive(set) => {
                    match_exhaustive(&rec.translation, set, cfg.match_mode).into_verdict(&case.id, &rec.system_id)
                }
                CandidateEntry::Contrastive(pair) => {
                    let emb = embedder.expect("checked above");
                    judge_contrastive(&rec.translation, pair, emb, &cfg.tokenizer)
                        .map_err(|source| RunError::Detect {
                            case_id: case.id.clone(),
                            source,
                        })?
                        .into_verdict(&case.id, &rec.system_id)
                }
            };
            Ok(verdict)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::MockEmbedder;
    use crate::model::{CandidateSet, ContrastivePair, LanguagePair};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Echo(AtomicUsize);

    impl Translator for Echo {
        fn system_id(&self) -> &str {
            "echo"
        }
        fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>> {
            self.0.fetch_add(items.len(), Ordering::SeqCst);
            items.iter().map(|i| Ok(i.source.to_string())).collect()
        }
    }

    fn spec(kind: DetectorKind) -> PropertySpec {
        PropertySpec {
            id: "names".into(),
            name: "first name".into(),
            detector: kind,
            source_prompt: "{property} {demo_1}".into(),
            candidate_prompt: "{value}".into(),
            foil_prompt: (kind == DetectorKind::Contrastive).then(|| "{value}".into()),
            demos: vec!["[Ann] came.".into()],
            language_pair: LanguagePair::new("en", "de"),
        }
    }

    fn cases() -> Vec<TestCase> {
        ["[Alice] sings.", "Call [Bob] now.", "[Alice] left early."]
            .iter()
            .enumerate()
            .map(|(i, raw)| TestCase::from_raw(format!("names-{i}"), "names", *raw).unwrap())
            .collect()
    }

    fn name_candidates() -> Vec<CandidateEntry> {
        vec![
            CandidateSet::new("Alice", vec!["Alice".into()]).unwrap().into(),
            CandidateSet::new("Bob", vec!["Bob".into()]).unwrap().into(),
        ]
    }

    #[test]
    fn identity_translation_strips_brackets() {
        let out = translate_all(&cases(), &Echo(AtomicUsize::new(0)), None).unwrap();
        assert_eq!(out.records[1].translation, "Call Bob now.");
        assert_eq!(out.sent, 3);
    }

    #[test]
    fn warm_cache_sends_nothing() {
        let echo = Echo(AtomicUsize::new(0));
        let mut cache = TranslationCache::in_memory();
        translate_all(&cases(), &echo, Some(&mut cache)).unwrap();
        let again = translate_all(&cases(), &echo, Some(&mut cache)).unwrap();
        assert_eq!(again.sent, 0);
        assert_eq!(echo.0.load(Ordering::SeqCst), 3);
        assert_eq!(again.records.len(), 3);
    }

    #[test]
    fn names_pass_under_identity() {
        let cs = cases();
        let tr = translate_all(&cs, &Echo(AtomicUsize::new(0)), None).unwrap();
        let v = evaluate(
            &spec(DetectorKind::Exhaustive),
            &cs,
            &name_candidates(),
            &tr.records,
            &DetectorConfig::default(),
            None,
        )
        .unwrap();
        assert!(v.iter().all(|v| v.pass));
    }

    #[test]
    fn empty_translations_fail() {
        let cs = cases();
        let recs: Vec<TranslationRecord> = cs
            .iter()
            .map(|c| TranslationRecord {
                case_id: c.id.clone(),
                system_id: "s".into(),
                translation: String::new(),
            })
            .collect();
        let v = evaluate(
            &spec(DetectorKind::Exhaustive),
            &cs,
            &name_candidates(),
            &recs,
            &DetectorConfig::default(),
            None,
        )
        .unwrap();
        assert!(v.iter().all(|v| !v.pass));
    }

    #[test]
    fn missing_candidates_are_reported() {
        let cs = cases();
        let err = index_candidates(&spec(DetectorKind::Exhaustive), &cs, &name_candidates()[..1]).unwrap_err();
        match err {
            RunError::MissingCandidates { values, case_ids, .. } => {
                assert_eq!(values, ["Bob"]);
                assert_eq!(case_ids, ["names-1"]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn contrastive_verdicts_carry_scores() {
        let cs = cases();
        let tr = translate_all(&cs, &Echo(AtomicUsize::new(0)), None).unwrap();
        let pairs: Vec<CandidateEntry> = ["Alice", "Bob"]
            .iter()
            .map(|v| {
                ContrastivePair::new(*v, vec![v.to_string()], vec!["someone".into()])
                    .unwrap()
                    .into()
            })
            .collect();
        let sp = spec(DetectorKind::Contrastive);
        assert!(matches!(
            evaluate(&sp, &cs, &pairs, &tr.records, &DetectorConfig::default(), None),
            Err(RunError::NoEmbedder(_))
        ));
        let emb = MockEmbedder::default();
        let v = evaluate(&sp, &cs, &pairs, &tr.records, &DetectorConfig::default(), Some(&emb)).unwrap();
        assert!(v.iter().all(|v| v.scores.is_some() && v.pass));
        assert!(matches!(
            evaluate(
                &spec(DetectorKind::Exhaustive),
                &cs,
                &pairs,
                &tr.records,
                &DetectorConfig::default(),
                None
            ),
            Err(RunError::DetectorMismatch { .. })
        ));
    }
}
