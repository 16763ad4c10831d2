//! Human review loop: sample verdicts for annotation, tally false
//! positives and negatives, and apply candidate edits.

use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CandidateEntry, ModelError, TestCase, TranslationRecord, Verdict};
use crate::text::fold;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSample {
    pub passes: Vec<Verdict>,
    pub fails: Vec<Verdict>,
    pub warnings: Vec<String>,
}

fn pick(stratum: Vec<&Verdict>, k: usize, rng: &mut Pcg64, label: &str, warnings: &mut Vec<String>) -> Vec<Verdict> {
    if stratum.len() <= k {
        if stratum.len() < k {
            warnings.push(format!(
                "only {} {label} verdicts available, {k} requested",
                stratum.len()
            ));
        }
        return stratum.into_iter().cloned().collect();
    }
    let mut idx = index::sample(rng, stratum.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| stratum[i].clone()).collect()
}

/// Up to `k` passing and `k` failing verdicts, drawn uniformly without
/// replacement and kept in input order.
pub fn sample_for_annotation(verdicts: &[Verdict], k: usize, seed: u64) -> AnnotationSample {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut out = AnnotationSample::default();
    let (pass, fail): (Vec<&Verdict>, Vec<&Verdict>) = verdicts.iter().partition(|v| v.pass);
    out.passes = pick(pass, k, &mut rng, "passing", &mut out.warnings);
    out.fails = pick(fail, k, &mut rng, "failing", &mut out.warnings);
    out
}

/// One line of a review file. Reviewers fill in `verdict_correct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRow {
    pub case_id: String,
    pub system_id: String,
    pub source: String,
    pub value: String,
    pub translation: String,
    pub pass: bool,
    pub candidates: CandidateEntry,
    #[serde(default)]
    pub verdict_correct: Option<bool>,
}

/// Joins sampled verdicts with their cases, translations and candidates.
/// Verdicts whose case, translation or candidates cannot be found are skipped.
pub fn review_rows(
    sample: &[Verdict],
    cases: &[TestCase],
    translations: &[TranslationRecord],
    candidates: &[CandidateEntry],
) -> Vec<ReviewRow> {
    let cases: HashMap<&str, &TestCase> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let trans: HashMap<(&str, &str), &str> = translations
        .iter()
        .map(|t| ((t.case_id.as_str(), t.system_id.as_str()), t.translation.as_str()))
        .collect();
    let cands: HashMap<&str, &CandidateEntry> = candidates.iter().map(|c| (c.value(), c)).collect();
    sample
        .iter()
        .filter_map(|v| {
            let case = cases.get(v.case_id.as_str())?;
            Some(ReviewRow {
                case_id: v.case_id.clone(),
                system_id: v.system_id.clone(),
                source: case.source.clone(),
                value: case.value.clone(),
                translation: trans.get(&(v.case_id.as_str(), v.system_id.as_str()))?.to_string(),
                pass: v.pass,
                candidates: (*cands.get(case.value.as_str())?).clone(),
                verdict_correct: None,
            })
        })
        .collect()
}

/// Counts over a reviewed file. A false positive is a pass the reviewer
/// marked incorrect; a false negative is such a fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTally {
    pub rows: usize,
    pub reviewed: usize,
    pub passes_reviewed: usize,
    pub fails_reviewed: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

pub fn tally_review(rows: &[ReviewRow]) -> ReviewTally {
    let mut t = ReviewTally {
        rows: rows.len(),
        ..Default::default()
    };
    for r in rows {
        let Some(correct) = r.verdict_correct else { continue };
        t.reviewed += 1;
        if r.pass {
            t.passes_reviewed += 1;
            t.false_positives += usize::from(!correct);
        } else {
            t.fails_reviewed += 1;
            t.false_negatives += usize::from(!correct);
        }
    }
    t
}

#[derive(Debug, Error)]
pub enum EditError {
    #[error("edit {index}: no candidate entry for value {value:?}")]
    UnknownValue { index: usize, value: String },
    #[error("edit {index}: cannot add an empty candidate")]
    EmptyAddition { index: usize },
    #[error("edit {index}: {candidate:?} is not among the {list} of {value:?}")]
    NotFound {
        index: usize,
        value: String,
        list: &'static str,
        candidate: String,
    },
    #[error("edit {index}: removing would leave no {list} for {value:?}")]
    WouldEmpty {
        index: usize,
        value: String,
        list: &'static str,
    },
    #[error("edit {index}: value {value:?} has no foil list")]
    NoFoils { index: usize, value: String },
    #[error("edit {index}: {source}")]
    Invalid {
        index: usize,
        #[source]
        source: ModelError,
    },
}

/// `add`/`remove` act on the candidate list (or the correct list of a
/// contrastive entry); `add_foil`/`remove_foil` on foils.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateEdit {
    pub value: String,
    pub add: Vec<String>,
    pub remove: Vec<String>,
    pub add_foil: Vec<String>,
    pub remove_foil: Vec<String>,
}

impl CandidateEdit {
    pub fn only_adds(&self) -> bool {
        self.remove.is_empty() && self.remove_foil.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub value: String,
    pub action: String,
    pub list: String,
    pub candidate: String,
}

fn edit_list(
    index: usize,
    value: &str,
    list_name: &'static str,
    list: &mut Vec<String>,
    add: &[String],
    remove: &[String],
    audit: &mut Vec<AuditEntry>,
) -> Result<(), EditError> {
    let mut record = |action: &str, candidate: &str| {
        audit.push(AuditEntry {
            value: value.to_string(),
            action: action.into(),
            list: list_name.into(),
            candidate: candidate.to_string(),
        })
    };
    for r in remove {
        let key = fold(r.trim());
        let pos = list
            .iter()
            .position(|c| fold(c) == key)
            .ok_or_else(|| EditError::NotFound {
                index,
                value: value.to_string(),
                list: list_name,
                candidate: r.clone(),
            })?;
        let removed = list.remove(pos);
        record("remove", &removed);
    }
    for a in add {
        let a = a.trim();
        if a.is_empty() {
            return Err(EditError::EmptyAddition { index });
        }
        if list.iter().any(|c| fold(c) == fold(a)) {
            record("already_present", a);
        } else {
            list.push(a.to_string());
            record("add", a);
        }
    }
    if list.is_empty() {
        return Err(EditError::WouldEmpty {
            index,
            value: value.to_string(),
            list: list_name,
        });
    }
    Ok(())
}

/// Applies edits in order. On error nothing is changed.
pub fn apply_candidate_edits(
    entries: &[CandidateEntry],
    edits: &[CandidateEdit],
) -> Result<(Vec<CandidateEntry>, Vec<AuditEntry>), EditError> {
    let mut out = entries.to_vec();
    let mut audit = Vec::new();
    for (index, edit) in edits.iter().enumerate() {
        let entry = out
            .iter_mut()
            .find(|e| e.value() == edit.value)
            .ok_or_else(|| EditError::UnknownValue {
                index,
                value: edit.value.clone(),
            })?;
        match entry {
            CandidateEntry::Exhaustive(set) => {
                if !edit.add_foil.is_empty() || !edit.remove_foil.is_empty() {
                    return Err(EditError::NoFoils {
                        index,
                        value: edit.value.clone(),
                    });
                }
                edit_list(
                    index,
                    &edit.value,
                    "candidates",
                    &mut set.candidates,
                    &edit.add,
                    &edit.remove,
                    &mut audit,
                )?;
            }
            CandidateEntry::Contrastive(pair) => {
                edit_list(
                    index,
                    &edit.value,
                    "correct",
                    &mut pair.correct,
                    &edit.add,
                    &edit.remove,
                    &mut audit,
                )?;
                edit_list(
                    index,
                    &edit.value,
                    "foil",
                    &mut pair.foil,
                    &edit.add_foil,
                    &edit.remove_foil,
                    &mut audit,
                )?;
            }
        }
        entry
            .validate()
            .map_err(|source| EditError::Invalid { index, source })?;
    }
    Ok((out, audit))
}
