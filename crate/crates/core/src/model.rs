//! Domain types shared by every stage and their on-disk formats.
//!
//! A test suite is a list of [`TestCase`]s, each holding one source sentence
//! with exactly one tagged property value. The LLM marks the value with
//! square brackets (`"The company received [4200.4]€."`); [`parse_bracketed`]
//! strips the markers and records where the value sits in the stripped
//! sentence. Spans count Unicode scalar values, not bytes.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::text::fold;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BracketError {
    #[error("no bracketed property value")]
    NoValue,
    #[error("{0} bracketed property values, expected exactly one")]
    MultipleValues(usize),
    #[error("unbalanced or nested brackets")]
    UnbalancedBrackets,
    #[error("bracketed property value is empty")]
    EmptyValue,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("record {id}: {reason}")]
    Invariant { id: String, reason: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
}

impl ModelError {
    fn invariant(id: &str, reason: impl Into<String>) -> Self {
        ModelError::Invariant {
            id: id.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Exhaustive,
    Contrastive,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::Exhaustive => f.write_str("exhaustive"),
            DetectorKind::Contrastive => f.write_str("contrastive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: String,
    pub target: String,
}

impl LanguagePair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

/// One tested language property: its prompts, demonstrations and detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub id: String,
    /// Human label, substituted for `{property}` in prompts.
    pub name: String,
    pub detector: DetectorKind,
    pub source_prompt: String,
    pub candidate_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foil_prompt: Option<String>,
    pub demos: Vec<String>,
    pub language_pair: LanguagePair,
}

impl PropertySpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.trim().is_empty() {
            return Err(ModelError::invariant(&self.name, "property id is empty"));
        }
        if self.detector == DetectorKind::Contrastive && self.foil_prompt.is_none() {
            return Err(ModelError::invariant(
                &self.id,
                "contrastive property needs a foil prompt",
            ));
        }
        if self.demos.is_empty() {
            return Err(ModelError::invariant(
                &self.id,
                "at least one demonstration is required",
            ));
        }
        Ok(())
    }
}

/// Validates each property and the uniqueness of ids.
pub fn validate_properties(props: &[PropertySpec]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for p in props {
        p.validate()?;
        if !seen.insert(p.id.as_str()) {
            return Err(ModelError::DuplicateId(p.id.clone()));
        }
    }
    Ok(())
}

/// Half-open interval of character (Unicode scalar) offsets, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        Ok(Span { start, end })
    }
}

/// Result of stripping the bracket markers from one LLM line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bracketed {
    pub source: String,
    pub value: String,
    pub span: Span,
}

/// Removes the single `[...]` pair from `raw`, returning the stripped sentence,
/// the enclosed value and the value's character span in the stripped sentence.
pub fn parse_bracketed(raw: &str) -> Result<Bracketed, BracketError> {
    let mut source = String::with_capacity(raw.len());
    let mut value = String::new();
    let mut open_at: Option<usize> = None;
    let mut span = None;
    let mut pairs = 0usize;
    let mut chars_out = 0usize;

    for c in raw.chars() {
        match c {
            '[' => {
                if open_at.is_some() {
                    return Err(BracketError::UnbalancedBrackets);
                }
                open_at = Some(chars_out);
            }
            ']' => {
                let start = open_at.take().ok_or(BracketError::UnbalancedBrackets)?;
                pairs += 1;
                if pairs == 1 {
                    span = Some(Span { start, end: chars_out });
                }
            }
            _ => {
                source.push(c);
                if open_at.is_some() && pairs == 0 {
                    value.push(c);
                }
                chars_out += 1;
            }
        }
    }
    if open_at.is_some() {
        return Err(BracketError::UnbalancedBrackets);
    }
    match pairs {
        0 => Err(BracketError::NoValue),
        1 => {
            if value.trim().is_empty() {
                return Err(BracketError::EmptyValue);
            }
            Ok(Bracketed {
                source,
                value,
                span: span.expect("one pair closed"),
            })
        }
        n => Err(BracketError::MultipleValues(n)),
    }
}

fn char_slice(s: &str, span: Span) -> Option<String> {
    if span.start > span.end {
        return None;
    }
    let total = s.chars().count();
    if span.end > total {
        return None;
    }
    Some(s.chars().skip(span.start).take(span.len()).collect())
}

/// One source sentence with its tagged property value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub property_id: String,
    /// LLM line including the bracket markers.
    pub raw: String,
    /// Marker-stripped sentence sent to MT systems.
    pub source: String,
    pub value: String,
    pub value_span: Span,
}

impl TestCase {
    pub fn from_raw(
        id: impl Into<String>,
        property_id: impl Into<String>,
        raw: impl Into<String>,
    ) -> Result<Self, BracketError> {
        let raw = raw.into();
        let b = parse_bracketed(&raw)?;
        Ok(TestCase {
            id: id.into(),
            property_id: property_id.into(),
            raw,
            source: b.source,
            value: b.value,
            value_span: b.span,
        })
    }

    pub fn from_bracketed(
        id: impl Into<String>,
        property_id: impl Into<String>,
        raw: impl Into<String>,
        b: Bracketed,
    ) -> Self {
        TestCase {
            id: id.into(),
            property_id: property_id.into(),
            raw: raw.into(),
            source: b.source,
            value: b.value,
            value_span: b.span,
        }
    }

    /// Re-inserts `[value]` at the span, which must reproduce `raw`.
    pub fn reconstruct_raw(&self) -> String {
        let before: String = self.source.chars().take(self.value_span.start).collect();
        let after: String = self.source.chars().skip(self.value_span.end).collect();
        format!("{before}[{}]{after}", self.value)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::invariant("<empty>", "case id is empty"));
        }
        if self.value.trim().is_empty() {
            return Err(ModelError::invariant(&self.id, "property value is empty"));
        }
        match char_slice(&self.source, self.value_span) {
            Some(s) if s == self.value => {}
            _ => {
                return Err(ModelError::invariant(
                    &self.id,
                    format!(
                        "source does not contain value {:?} at span [{}, {})",
                        self.value, self.value_span.start, self.value_span.end
                    ),
                ))
            }
        }
        if self.reconstruct_raw() != self.raw {
            return Err(ModelError::invariant(
                &self.id,
                "raw is not the source with the value bracketed",
            ));
        }
        Ok(())
    }
}

pub fn validate_suite(cases: &[TestCase]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for case in cases {
        case.validate()?;
        if !seen.insert(case.id.as_str()) {
            return Err(ModelError::DuplicateId(case.id.clone()));
        }
    }
    Ok(())
}

pub fn load_suite(path: &Path) -> Result<Vec<TestCase>, ModelError> {
    let cases: Vec<TestCase> = jsonl::read(path)?;
    validate_suite(&cases)?;
    Ok(cases)
}

pub fn save_suite(cases: &[TestCase], path: &Path) -> Result<(), ModelError> {
    Ok(jsonl::write(path, cases)?)
}

fn check_candidate_list(value: &str, label: &str, list: &[String]) -> Result<(), ModelError> {
    if list.is_empty() {
        return Err(ModelError::invariant(value, format!("{label} list is empty")));
    }
    let mut seen = HashSet::new();
    for c in list {
        if c.trim().is_empty() {
            return Err(ModelError::invariant(value, format!("{label} list has a blank entry")));
        }
        if !seen.insert(fold(c)) {
            return Err(ModelError::invariant(
                value,
                format!("{label} list repeats {c:?} (case-insensitively)"),
            ));
        }
    }
    Ok(())
}

/// Trims entries, drops blanks and keeps the first of any case-folded duplicates.
pub fn dedupe_candidates<I, S>(items: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in items {
        let t = item.as_ref().trim();
        if t.is_empty() {
            continue;
        }
        if seen.insert(fold(t)) {
            out.push(t.to_string());
        }
    }
    out
}

/// Valid target-language renderings of one property value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub value: String,
    pub candidates: Vec<String>,
}

impl CandidateSet {
    pub fn new(value: impl Into<String>, candidates: Vec<String>) -> Result<Self, ModelError> {
        let set = CandidateSet {
            value: value.into(),
            candidates,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_candidate_list(&self.value, "candidates", &self.candidates)
    }
}

/// Correct (figurative) and foil (literal) renderings of one value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub value: String,
    pub correct: Vec<String>,
    pub foil: Vec<String>,
}

impl ContrastivePair {
    pub fn new(value: impl Into<String>, correct: Vec<String>, foil: Vec<String>) -> Result<Self, ModelError> {
        let pair = ContrastivePair {
            value: value.into(),
            correct,
            foil,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_candidate_list(&self.value, "correct", &self.correct)?;
        check_candidate_list(&self.value, "foil", &self.foil)?;
        let correct: HashSet<String> = self.correct.iter().map(|c| fold(c)).collect();
        if let Some(c) = self.foil.iter().find(|c| correct.contains(&fold(c))) {
            return Err(ModelError::invariant(
                &self.value,
                format!("{c:?} is both correct and foil"),
            ));
        }
        Ok(())
    }
}

/// One line of `candidates.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CandidateEntry {
    Exhaustive(CandidateSet),
    Contrastive(ContrastivePair),
}

impl CandidateEntry {
    pub fn value(&self) -> &str {
        match self {
            CandidateEntry::Exhaustive(s) => &s.value,
            CandidateEntry::Contrastive(p) => &p.value,
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            CandidateEntry::Exhaustive(_) => DetectorKind::Exhaustive,
            CandidateEntry::Contrastive(_) => DetectorKind::Contrastive,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            CandidateEntry::Exhaustive(s) => s.validate(),
            CandidateEntry::Contrastive(p) => p.validate(),
        }
    }
}

impl From<CandidateSet> for CandidateEntry {
    fn from(s: CandidateSet) -> Self {
        CandidateEntry::Exhaustive(s)
    }
}

impl From<ContrastivePair> for CandidateEntry {
    fn from(p: ContrastivePair) -> Self {
        CandidateEntry::Contrastive(p)
    }
}

pub fn load_candidates(path: &Path) -> Result<Vec<CandidateEntry>, ModelError> {
    let entries: Vec<CandidateEntry> = jsonl::read(path)?;
    let mut seen = HashSet::new();
    for e in &entries {
        e.validate()?;
        if !seen.insert(e.value()) {
            return Err(ModelError::DuplicateId(e.value().to_string()));
        }
    }
    Ok(entries)
}

pub fn save_candidates(entries: &[CandidateEntry], path: &Path) -> Result<(), ModelError> {
    Ok(jsonl::write(path, entries)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub case_id: String,
    pub system_id: String,
    pub translation: String,
}

/// Contrastive similarity scores, serialized as `[correct, foil]`.
///
/// A translation without any tokens has no grams and scores negative
/// infinity; that is written as `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScores {
    pub correct: f64,
    pub foil: f64,
}

impl Serialize for SimilarityScores {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let enc = |x: f64| x.is_finite().then_some(x);
        [enc(self.correct), enc(self.foil)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimilarityScores {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [c, f] = <[Option<f64>; 2]>::deserialize(d)?;
        Ok(SimilarityScores {
            correct: c.unwrap_or(f64::NEG_INFINITY),
            foil: f.unwrap_or(f64::NEG_INFINITY),
        })
    }
}

/// Pass/fail outcome for one (case, system).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub case_id: String,
    pub system_id: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<SimilarityScores>,
}

impl Verdict {
    pub fn check(&self, entry: &CandidateEntry) -> Result<(), ModelError> {
        match entry {
            CandidateEntry::Exhaustive(set) => {
                if self.pass {
                    let ok = self
                        .matched_candidate
                        .as_ref()
                        .is_some_and(|m| set.candidates.contains(m));
                    if !ok {
                        return Err(ModelError::invariant(
                            &self.case_id,
                            "passing exhaustive verdict without a matched candidate",
                        ));
                    }
                }
            }
            CandidateEntry::Contrastive(_) => {
                if self.scores.is_none() {
                    return Err(ModelError::invariant(
                        &self.case_id,
                        "contrastive verdict without scores",
                    ));
                }
            }
        }
        Ok(())
    }
}
