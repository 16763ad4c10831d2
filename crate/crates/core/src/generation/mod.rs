//! LLM-driven construction of test suites and candidate sets.
//!
//! Suites are grown batch by batch: the same source prompt is sent
//! repeatedly, each reply is split into `- ` items, and every item is
//! filtered (bracket parse, single sentence, not a duplicate) before it
//! becomes a [`TestCase`]. Candidate sets are requested per distinct
//! property value and parsed from `|`-separated replies.

pub mod llm;
pub mod templates;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use llm::{ChatProvider, LlmProvider, LlmRequest, ProviderError, ReplayFixture, ReplayProvider, Sampling};

use crate::model::{
    dedupe_candidates, parse_bracketed, BracketError, Bracketed, CandidateSet, ContrastivePair, DetectorKind,
    ModelError, PropertySpec, TestCase,
};
use crate::text::{fold, normalize_sentence};

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("template needs {needed} demonstrations, property {property} has {have}")]
    MissingDemo {
        property: String,
        needed: usize,
        have: usize,
    },
    #[error("template placeholder {{{0}}} has no value")]
    UnknownPlaceholder(String),
    #[error("property {0} has no foil prompt")]
    MissingFoilPrompt(String),
    #[error("LLM could not answer for value {0:?}")]
    UnanswerableValue(String),
    #[error("no {list} candidates left for value {value:?} after parsing")]
    EmptyAfterParse { value: String, list: &'static str },
    #[error("gave up after {batches} batches with {kept} of {target} sentences")]
    MaxBatchesExceeded { batches: usize, kept: usize, target: usize },
    #[error("target count must be at least 1")]
    ZeroTarget,
    #[error("generation log is empty")]
    EmptyLog,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn language_vars(spec: &PropertySpec) -> [(&'static str, &str); 9] {
    let src = templates::language_name(&spec.language_pair.source);
    let tgt = templates::language_name(&spec.language_pair.target);
    [
        ("property", spec.name.as_str()),
        ("src_lang", src),
        ("tgt_lang", tgt),
        ("source_lang", src),
        ("target_lang", tgt),
        ("src_lang_name", src),
        ("tgt_lang_name", tgt),
        ("src_tag", spec.language_pair.source.as_str()),
        ("tgt_tag", spec.language_pair.target.as_str()),
    ]
}

/// Fills the source prompt with the property label and the first demos.
pub fn render_source_prompt(spec: &PropertySpec) -> Result<String, GenError> {
    let needed = templates::demo_slots(&spec.source_prompt).max(1);
    if spec.demos.len() < needed {
        return Err(GenError::MissingDemo {
            property: spec.id.clone(),
            needed,
            have: spec.demos.len(),
        });
    }
    let names: Vec<String> = (1..=needed).map(|i| format!("demo_{i}")).collect();
    let mut vars: Vec<(&str, &str)> = language_vars(spec).to_vec();
    vars.extend(
        names
            .iter()
            .map(String::as_str)
            .zip(spec.demos.iter().map(String::as_str)),
    );
    templates::render(&spec.source_prompt, &vars)
}

/// Candidate prompt for `value`; for contrastive properties this is the
/// prompt asking for correct (figurative) renderings.
pub fn render_candidate_prompt(spec: &PropertySpec, value: &str, sentence: &str) -> Result<String, GenError> {
    let mut vars: Vec<(&str, &str)> = language_vars(spec).to_vec();
    vars.push(("value", value));
    vars.push(("sentence", sentence));
    templates::render(&spec.candidate_prompt, &vars)
}

pub fn render_foil_prompt(spec: &PropertySpec, value: &str) -> Result<String, GenError> {
    let template = spec
        .foil_prompt
        .as_deref()
        .ok_or_else(|| GenError::MissingFoilPrompt(spec.id.clone()))?;
    let mut vars: Vec<(&str, &str)> = language_vars(spec).to_vec();
    vars.push(("value", value));
    templates::render(template, &vars)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemList {
    pub items: Vec<String>,
    /// Non-item lines (chatter, blanks).
    pub dropped: usize,
}

/// Keeps the `- ` items of an LLM reply, marker removed.
pub fn parse_item_list(response: &str) -> ItemList {
    let mut out = ItemList::default();
    for line in response.lines() {
        match line.trim().strip_prefix("- ").map(str::trim) {
            Some(item) if !item.is_empty() => out.items.push(item.to_string()),
            _ => out.dropped += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Duplicate,
    MultiValue,
    NoValue,
    MultiSentence,
    Unbalanced,
}

impl From<BracketError> for RejectReason {
    fn from(e: BracketError) -> Self {
        match e {
            BracketError::NoValue | BracketError::EmptyValue => RejectReason::NoValue,
            BracketError::MultipleValues(_) => RejectReason::MultiValue,
            BracketError::UnbalancedBrackets => RejectReason::Unbalanced,
        }
    }
}

/// A terminal mark followed by whitespace and then a letter.
pub fn is_multi_sentence(sentence: &str) -> bool {
    let chars: Vec<char> = sentence.trim().chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut j = i + 1;
        if j >= chars.len() || !chars[j].is_whitespace() {
            continue;
        }
        while j < chars.len() && chars[j].is_whitespace() {
            j += 1;
        }
        if j < chars.len() && chars[j].is_alphabetic() {
            return true;
        }
    }
    false
}

/// Normalized sentences accepted so far.
#[derive(Debug, Clone, Default)]
pub struct SeenSentences(HashSet<String>);

impl SeenSentences {
    pub fn from_cases(cases: &[TestCase]) -> Self {
        Self(cases.iter().map(|c| normalize_sentence(&c.source)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    /// `(raw item, parsed)` in input order.
    pub accepted: Vec<(String, Bracketed)>,
    pub rejections: Vec<(String, RejectReason)>,
}

fn check_item(item: &str, seen: &SeenSentences) -> Result<(Bracketed, String), RejectReason> {
    let parsed = parse_bracketed(item)?;
    if is_multi_sentence(&parsed.source) {
        return Err(RejectReason::MultiSentence);
    }
    let key = normalize_sentence(&parsed.source);
    if seen.0.contains(&key) {
        return Err(RejectReason::Duplicate);
    }
    Ok((parsed, key))
}

/// Filters one batch of items against (and into) `seen`.
pub fn filter_sentences(items: &[String], seen: &mut SeenSentences) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for item in items {
        match check_item(item, seen) {
            Ok((parsed, key)) => {
                seen.0.insert(key);
                out.accepted.push((item.clone(), parsed));
            }
            Err(reason) => out.rejections.push((item.clone(), reason)),
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchLog {
    pub batch: usize,
    pub emitted: usize,
    pub kept: usize,
    pub rejected_by_reason: BTreeMap<RejectReason, usize>,
    pub non_item_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub batch: usize,
    pub item: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<RejectReason>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub property_id: String,
    pub target_count: usize,
    pub seed: u64,
    pub batches: Vec<BatchLog>,
    pub items: Vec<ItemRecord>,
    /// Accepted cases per normalized property value.
    pub value_counts: BTreeMap<String, usize>,
}

impl GenerationLog {
    pub fn emitted(&self) -> usize {
        self.batches.iter().map(|b| b.emitted).sum()
    }

    pub fn kept(&self) -> usize {
        self.batches.iter().map(|b| b.kept).sum()
    }

    pub fn rejected_by_reason(&self) -> BTreeMap<RejectReason, usize> {
        let mut out = BTreeMap::new();
        for b in &self.batches {
            for (r, n) in &b.rejected_by_reason {
                *out.entry(*r).or_insert(0) += n;
            }
        }
        out
    }

    pub fn rejected(&self) -> usize {
        self.rejected_by_reason().values().sum()
    }

    pub fn distinct_values(&self) -> usize {
        self.value_counts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Share of emitted items that passed filtering.
    pub kept: f64,
    /// Share of kept items whose property value was new.
    pub unique_values: f64,
}

pub fn generation_stats(log: &GenerationLog) -> Result<GenerationStats, GenError> {
    let emitted = log.emitted();
    if emitted == 0 {
        return Err(GenError::EmptyLog);
    }
    let kept = log.kept();
    Ok(GenerationStats {
        kept: kept as f64 / emitted as f64,
        unique_values: if kept == 0 {
            0.0
        } else {
            log.distinct_values() as f64 / kept as f64
        },
    })
}

/// Upper bound on batches for a target; a batch nominally yields ten items.
pub fn max_batches(target_count: usize) -> usize {
    target_count.div_ceil(2)
}

/// Stable sub-seed for a named purpose.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Drives one LLM provider with fixed sampling parameters.
pub struct Generator<'a> {
    llm: &'a dyn LlmProvider,
    sampling: Sampling,
}

impl<'a> Generator<'a> {
    pub fn new(llm: &'a dyn LlmProvider, sampling: Sampling) -> Self {
        Self { llm, sampling }
    }

    fn ask(&self, prompt: String, seed: Option<u64>) -> Result<String, GenError> {
        let mut req = LlmRequest::new(prompt, self.sampling, self.llm.id());
        req.seed = seed;
        Ok(self.llm.complete(&req)?)
    }

    /// Re-issues the source prompt until `target_count` cases pass filtering.
    ///
    /// Items are processed in reply order and processing stops as soon as
    /// the target is reached; items after that point are not counted.
    pub fn generate_suite(
        &self,
        spec: &PropertySpec,
        target_count: usize,
        seed: u64,
    ) -> Result<(Vec<TestCase>, GenerationLog), GenError> {
        if target_count == 0 {
            return Err(GenError::ZeroTarget);
        }
        let prompt = render_source_prompt(spec)?;
        let mut log = GenerationLog {
            property_id: spec.id.clone(),
            target_count,
            seed,
            ..Default::default()
        };
        let mut seen = SeenSentences::default();
        let mut cases: Vec<TestCase> = Vec::with_capacity(target_count);
        let cap = max_batches(target_count);

        for batch in 0..cap {
            if cases.len() >= target_count {
                break;
            }
            let reply = self.ask(prompt.clone(), Some(seed.wrapping_add(batch as u64)))?;
            let parsed = parse_item_list(&reply);
            let mut entry = BatchLog {
                batch,
                non_item_lines: parsed.dropped,
                ..Default::default()
            };
            for item in parsed.items {
                if cases.len() >= target_count {
                    break;
                }
                entry.emitted += 1;
                match check_item(&item, &seen) {
                    Ok((b, key)) => {
                        seen.0.insert(key);
                        let id = format!("{}-{:04}", spec.id, cases.len() + 1);
                        *log.value_counts.entry(normalize_sentence(&b.value)).or_insert(0) += 1;
                        log.items.push(ItemRecord {
                            batch,
                            item: item.clone(),
                            case_id: Some(id.clone()),
                            rejected: None,
                        });
                        entry.kept += 1;
                        cases.push(TestCase::from_bracketed(id, &spec.id, item, b));
                    }
                    Err(reason) => {
                        *entry.rejected_by_reason.entry(reason).or_insert(0) += 1;
                        log.items.push(ItemRecord {
                            batch,
                            item,
                            case_id: None,
                            rejected: Some(reason),
                        });
                    }
                }
            }
            log.batches.push(entry);
        }
        if cases.len() < target_count {
            return Err(GenError::MaxBatchesExceeded {
                batches: cap,
                kept: cases.len(),
                target: target_count,
            });
        }
        Ok((cases, log))
    }

    pub fn exhaustive_candidates(&self, value: &str, spec: &PropertySpec) -> Result<CandidateSet, GenError> {
        let reply = self.ask(render_candidate_prompt(spec, value, "")?, None)?;
        let candidates = parse_candidate_reply(value, &reply, "candidate")?;
        Ok(CandidateSet::new(value, candidates)?)
    }

    /// Correct renderings come from the figurative prompt (given the full
    /// sentence), foils from the literal prompt (given the value alone).
    /// Entries proposed on both sides stay only on the correct side.
    pub fn contrastive_pair(
        &self,
        value: &str,
        sentence: &str,
        spec: &PropertySpec,
    ) -> Result<ContrastivePair, GenError> {
        let correct_reply = self.ask(render_candidate_prompt(spec, value, sentence)?, None)?;
        let foil_reply = self.ask(render_foil_prompt(spec, value)?, None)?;
        let correct = parse_candidate_reply(value, &correct_reply, "correct")?;
        let mut foil = parse_candidate_reply(value, &foil_reply, "foil")?;
        let folded: HashSet<String> = correct.iter().map(|c| fold(c)).collect();
        foil.retain(|f| !folded.contains(&fold(f)));
        if foil.is_empty() {
            return Err(GenError::EmptyAfterParse {
                value: value.to_string(),
                list: "foil",
            });
        }
        Ok(ContrastivePair::new(value, correct, foil)?)
    }

    /// Candidate entry for a case, chosen by the property's detector.
    pub fn candidates_for(
        &self,
        case: &TestCase,
        spec: &PropertySpec,
    ) -> Result<crate::model::CandidateEntry, GenError> {
        Ok(match spec.detector {
            DetectorKind::Exhaustive => self.exhaustive_candidates(&case.value, spec)?.into(),
            DetectorKind::Contrastive => self.contrastive_pair(&case.value, &case.source, spec)?.into(),
        })
    }
}

/// Splits a `|`-separated reply. A bare `NA` means the LLM gave up.
pub fn parse_candidate_reply(value: &str, reply: &str, list: &'static str) -> Result<Vec<String>, GenError> {
    let trimmed = reply.trim();
    if trimmed.eq_ignore_ascii_case("na") {
        return Err(GenError::UnanswerableValue(value.to_string()));
    }
    let parts = dedupe_candidates(
        trimmed
            .split(['|', '\n'])
            .filter(|p| !p.trim().eq_ignore_ascii_case("na")),
    );
    if parts.is_empty() {
        return Err(GenError::EmptyAfterParse {
            value: value.to_string(),
            list,
        });
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LanguagePair;

    fn spec(name: &str, demos: &[&str]) -> PropertySpec {
        PropertySpec {
            id: "p".into(),
            name: name.into(),
            detector: DetectorKind::Exhaustive,
            source_prompt: templates::SOURCE_SENTENCES.into(),
            candidate_prompt: "You are a {src_lang}-{tgt_lang} translator. Given a {property}, write as many valid {tgt_lang} translations as you can. Use \"|\" to separate between valid translations.\nWrite \"NA\" if unable to accomplish the task.\n\n{value}\n".into(),
            foil_prompt: None,
            demos: demos.iter().map(|s| s.to_string()).collect(),
            language_pair: LanguagePair::new("en", "es"),
        }
    }

    #[test]
    fn source_prompt_rendering() {
        let demos = ["It cost [12.5] dollars.", "He ran [3.2] km.", "Add [0.75] cups."];
        let p = render_source_prompt(&spec("decimal number", &demos)).unwrap();
        for d in demos {
            assert!(p.contains(d));
        }
        assert!(p
            .trim_end()
            .ends_with("Now write 10 more diverse sentences itemizing them with '-':"));
        let idiom = render_source_prompt(&spec("idiom", &demos)).unwrap();
        assert!(idiom.lines().next().unwrap().contains("one B = idiom"));
        assert!(matches!(
            render_source_prompt(&spec("idiom", &[])),
            Err(GenError::MissingDemo { needed: 3, have: 0, .. })
        ));
    }

    #[test]
    fn item_lists() {
        assert_eq!(parse_item_list("- A\n- B").items, vec!["A", "B"]);
        let chatty = parse_item_list("Sure! Here:\n- A");
        assert_eq!(chatty.items, vec!["A"]);
        assert_eq!(chatty.dropped, 1);
        assert!(parse_item_list("").items.is_empty());
    }

    #[test]
    fn filter_reasons() {
        let mut seen = SeenSentences::default();
        let items: Vec<String> = [
            "I saved [USD] 40.",
            "I  saved [usd] 40. ",
            "She ran [5] km. It was fun.",
            "She paid [5] for [3] apples.",
            "Nothing tagged.",
            "Broken [tag.",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let out = filter_sentences(&items, &mut seen);
        assert_eq!(out.accepted.len(), 1);
        let reasons: Vec<RejectReason> = out.rejections.iter().map(|r| r.1).collect();
        assert_eq!(
            reasons,
            [
                RejectReason::Duplicate,
                RejectReason::MultiSentence,
                RejectReason::MultiValue,
                RejectReason::NoValue,
                RejectReason::Unbalanced
            ]
        );
    }

    #[test]
    fn multi_sentence_rule() {
        assert!(is_multi_sentence("She ran 5 km. It was fun."));
        assert!(is_multi_sentence("Wow! That was 3 km."));
        assert!(!is_multi_sentence("The price rose to 4200.4€."));
        assert!(!is_multi_sentence("He said \"stop!\" and left."));
        // Abbreviations are rejected too.
        assert!(is_multi_sentence("It is 5 p.m. now."));
        assert!(!is_multi_sentence("Is it 5? 7 maybe"));
    }

    #[test]
    fn candidate_reply_parsing() {
        assert_eq!(
            parse_candidate_reply("kilometers", "kilómetros|km", "c").unwrap(),
            vec!["kilómetros", "km"]
        );
        assert!(matches!(
            parse_candidate_reply("x", " NA ", "c"),
            Err(GenError::UnanswerableValue(_))
        ));
        assert_eq!(parse_candidate_reply("a", "a| a |A", "c").unwrap(), vec!["a"]);
        assert!(matches!(
            parse_candidate_reply("a", " | ", "c"),
            Err(GenError::EmptyAfterParse { .. })
        ));
    }

    #[test]
    fn stats_examples() {
        let mut log = GenerationLog::default();
        log.batches.push(BatchLog {
            emitted: 100,
            kept: 80,
            rejected_by_reason: [(RejectReason::Duplicate, 20)].into(),
            ..Default::default()
        });
        log.value_counts = (0..40).map(|i| (format!("v{i}"), 2)).collect();
        let s = generation_stats(&log).unwrap();
        assert_eq!((s.kept, s.unique_values), (0.8, 0.5));
        assert!(matches!(
            generation_stats(&GenerationLog::default()),
            Err(GenError::EmptyLog)
        ));
    }

    #[test]
    fn batch_cap() {
        assert_eq!(max_batches(1000), 500);
        assert_eq!(max_batches(7), 4);
        assert_eq!(max_batches(1), 1);
    }
}
