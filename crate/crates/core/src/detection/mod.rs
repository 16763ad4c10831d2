//! Pass/fail detectors.
//!
//! Exhaustive candidate sets are judged by case-insensitive substring
//! matching: a translation passes when any candidate occurs in it. Note that
//! this is plain substring containment, so a short candidate such as `"mi"`
//! also matches inside longer words; [`MatchMode::TokenBoundary`] restricts
//! matches to non-alphanumeric boundaries for properties where that matters.
//!
//! Contrastive pairs are judged by n-gram similarity. For each candidate with
//! `n` tokens, the translation is cut into `n`-grams and the candidate's score
//! is the best cosine similarity between any gram and the candidate. The
//! translation passes when the best correct score is at least the best foil
//! score.

pub mod embed;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{CachedEmbedder, EmbedError, Embedder, EmbeddingVector, HttpEmbedder, MockEmbedder};

use crate::model::{CandidateSet, ContrastivePair, SimilarityScores, Verdict};
use crate::text::{fold, ngrams, TextError, TokenizerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("candidate {0:?} has no tokens")]
    EmptyCandidate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Substring,
    /// The match must not be flanked by letters or digits.
    TokenBoundary,
}

/// Detector settings recorded in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub match_mode: MatchMode,
    pub tokenizer: TokenizerConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExhaustiveOutcome {
    pub pass: bool,
    pub matched_candidate: Option<String>,
}

impl ExhaustiveOutcome {
    pub fn into_verdict(self, case_id: &str, system_id: &str) -> Verdict {
        Verdict {
            case_id: case_id.to_string(),
            system_id: system_id.to_string(),
            pass: self.pass,
            matched_candidate: self.matched_candidate,
            scores: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastiveOutcome {
    pub pass: bool,
    pub scores: SimilarityScores,
}

impl ContrastiveOutcome {
    pub fn into_verdict(self, case_id: &str, system_id: &str) -> Verdict {
        Verdict {
            case_id: case_id.to_string(),
            system_id: system_id.to_string(),
            pass: self.pass,
            matched_candidate: None,
            scores: Some(self.scores),
        }
    }
}

fn contains_at_boundary(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = haystack[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = haystack[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Passes when some candidate is a case-folded substring of `translation`.
/// The first matching candidate in set order is reported.
pub fn match_exhaustive(translation: &str, set: &CandidateSet, mode: MatchMode) -> ExhaustiveOutcome {
    let hay = fold(translation);
    let matched = set.candidates.iter().find(|c| {
        let needle = fold(c);
        match mode {
            MatchMode::Substring => !needle.is_empty() && hay.contains(&needle),
            MatchMode::TokenBoundary => contains_at_boundary(&hay, &needle),
        }
    });
    ExhaustiveOutcome {
        pass: matched.is_some(),
        matched_candidate: matched.cloned(),
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, DetectError> {
    if a.dim() != b.dim() {
        return Err(DetectError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (mut dot, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(DetectError::ZeroVector);
    }
    Ok((dot / (aa * bb).sqrt()).clamp(-1.0, 1.0))
}

/// The candidate as the detector sees it: its tokens re-joined, plus the count.
fn candidate_form(candidate: &str, tok: &TokenizerConfig) -> Result<(String, usize), DetectError> {
    let tokens = tok.tokens(candidate);
    if tokens.is_empty() {
        return Err(DetectError::EmptyCandidate(candidate.to_string()));
    }
    Ok((tok.join(&tokens), tokens.len()))
}

fn best_similarity(
    grams: &[String],
    candidate: &EmbeddingVector,
    vectors: &HashMap<&str, EmbeddingVector>,
) -> Result<f64, DetectError> {
    let mut best = f64::NEG_INFINITY;
    for g in grams {
        let sim = cosine(&vectors[g.as_str()], candidate)?;
        if sim > best {
            best = sim;
        }
    }
    Ok(best)
}

fn embed_unique<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    embedder: &dyn Embedder,
) -> Result<HashMap<&'a str, EmbeddingVector>, DetectError> {
    let mut seen = HashSet::new();
    let unique: Vec<&str> = texts.into_iter().filter(|t| seen.insert(*t)).collect();
    let owned: Vec<String> = unique.iter().map(|s| s.to_string()).collect();
    let vectors = embedder.embed(&owned)?;
    if vectors.len() != unique.len() {
        return Err(EmbedError::CountMismatch {
            expected: unique.len(),
            got: vectors.len(),
        }
        .into());
    }
    Ok(unique.into_iter().zip(vectors).collect())
}

/// Best cosine similarity between `candidate` and any `n`-gram of
/// `translation`, where `n` is the candidate's token count.
///
/// Returns negative infinity when the translation has no tokens.
pub fn max_sim(
    translation: &str,
    candidate: &str,
    embedder: &dyn Embedder,
    tok: &TokenizerConfig,
) -> Result<f64, DetectError> {
    let (cand_text, n) = candidate_form(candidate, tok)?;
    let grams = ngrams(translation, n, tok)?;
    if grams.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let vectors = embed_unique(
        std::iter::once(cand_text.as_str()).chain(grams.iter().map(String::as_str)),
        embedder,
    )?;
    best_similarity(&grams, &vectors[cand_text.as_str()], &vectors)
}

/// Judges a translation against a contrastive pair.
///
/// Ties pass. A translation without tokens fails.
pub fn judge_contrastive(
    translation: &str,
    pair: &ContrastivePair,
    embedder: &dyn Embedder,
    tok: &TokenizerConfig,
) -> Result<ContrastiveOutcome, DetectError> {
    let correct = pair
        .correct
        .iter()
        .map(|c| candidate_form(c, tok))
        .collect::<Result<Vec<_>, _>>()?;
    let foil = pair
        .foil
        .iter()
        .map(|c| candidate_form(c, tok))
        .collect::<Result<Vec<_>, _>>()?;

    let mut grams_by_n: HashMap<usize, Vec<String>> = HashMap::new();
    for (_, n) in correct.iter().chain(&foil) {
        if !grams_by_n.contains_key(n) {
            grams_by_n.insert(*n, ngrams(translation, *n, tok)?);
        }
    }
    let texts = correct
        .iter()
        .chain(&foil)
        .map(|(t, _)| t.as_str())
        .chain(grams_by_n.values().flatten().map(String::as_str));
    let vectors = embed_unique(texts, embedder)?;

    let side = |cands: &[(String, usize)]| -> Result<f64, DetectError> {
        let mut best = f64::NEG_INFINITY;
        for (text, n) in cands {
            let sim = best_similarity(&grams_by_n[n], &vectors[text.as_str()], &vectors)?;
            if sim > best {
                best = sim;
            }
        }
        Ok(best)
    };
    let scores = SimilarityScores {
        correct: side(&correct)?,
        foil: side(&foil)?,
    };
    Ok(ContrastiveOutcome {
        pass: scores.correct.is_finite() && scores.correct >= scores.foil,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cands: &[&str]) -> CandidateSet {
        CandidateSet::new("v", cands.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn miles_example() {
        let c = set(&["Meilen", "mi"]);
        let ok = match_exhaustive("Ich lief 3 Meilen.", &c, MatchMode::Substring);
        assert!(ok.pass);
        assert_eq!(ok.matched_candidate.as_deref(), Some("Meilen"));
        assert!(!match_exhaustive("Ich lief 3 km.", &c, MatchMode::Substring).pass);
        assert!(!match_exhaustive("", &set(&["x"]), MatchMode::Substring).pass);
    }

    #[test]
    fn decimal_formats_both_accepted() {
        let c = set(&["4200,4", "4.200,4"]);
        assert!(match_exhaustive("Das Unternehmen erhielt 4.200,4€.", &c, MatchMode::Substring).pass);
        assert!(match_exhaustive("Das Unternehmen erhielt 4200,4 €.", &c, MatchMode::Substring).pass);
        assert!(!match_exhaustive("Das Unternehmen erhielt 4200.4 €.", &c, MatchMode::Substring).pass);
    }

    #[test]
    fn substring_vs_token_boundary() {
        let c = set(&["mi"]);
        assert!(match_exhaustive("Ich bin mit dir", &c, MatchMode::Substring).pass);
        assert!(!match_exhaustive("Ich bin mit dir", &c, MatchMode::TokenBoundary).pass);
        assert!(match_exhaustive("3 mi, bitte", &c, MatchMode::TokenBoundary).pass);
        assert!(match_exhaustive("mimi mi", &c, MatchMode::TokenBoundary).pass);
    }

    #[test]
    fn case_insensitive_with_full_folding() {
        let c = set(&["STRASSE"]);
        assert!(match_exhaustive("Die Straße ist lang", &c, MatchMode::Substring).pass);
    }

    #[test]
    fn cosine_basics() {
        let v = EmbeddingVector::new(vec![0.3, -1.2, 2.0]).unwrap();
        let neg = EmbeddingVector::new(vec![-0.3, 1.2, -2.0]).unwrap();
        assert_eq!(cosine(&v, &v).unwrap(), 1.0);
        assert_eq!(cosine(&v, &neg).unwrap(), -1.0);
        let e1 = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let e2 = EmbeddingVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        let zero = EmbeddingVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(cosine(&e1, &zero), Err(DetectError::ZeroVector));
        assert_eq!(cosine(&e1, &v), Err(DetectError::DimensionMismatch(2, 3)));
    }

    #[test]
    fn max_sim_identity_and_fallback() {
        let e = MockEmbedder::default();
        let tok = TokenizerConfig::default();
        assert_eq!(max_sim("hola", "hola", &e, &tok).unwrap(), 1.0);
        let short = max_sim("hola", "muy muy emocionado", &e, &tok).unwrap();
        let whole = cosine(&e.vector("hola"), &e.vector("muy muy emocionado")).unwrap();
        assert_eq!(short, whole);
        assert_eq!(max_sim("", "hola", &e, &tok).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            max_sim("hola", "¡!", &e, &tok),
            Err(DetectError::EmptyCandidate(_))
        ));
    }

    #[test]
    fn contrastive_verdicts() {
        let e = MockEmbedder::default();
        let tok = TokenizerConfig::default();
        let pair = ContrastivePair::new(
            "break a leg",
            vec!["viel Glück".into(), "alles Gute".into()],
            vec!["brich dir ein Bein".into()],
        )
        .unwrap();
        let good = judge_contrastive("Sie wünschte ihm viel Glück!", &pair, &e, &tok).unwrap();
        assert!(good.pass);
        assert_eq!(good.scores.correct, 1.0);
        let bad = judge_contrastive("Sie sagte: brich dir ein Bein.", &pair, &e, &tok).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.scores.foil, 1.0);
        let empty = judge_contrastive("", &pair, &e, &tok).unwrap();
        assert!(!empty.pass);
    }

    #[test]
    fn contrastive_tie_passes() {
        // Same folded text on both sides can only arise through distinct
        // surface forms, so build the tie from equal-scoring vectors instead.
        struct Constant;
        impl Embedder for Constant {
            fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
                texts.iter().map(|_| EmbeddingVector::new(vec![1.0, 0.0])).collect()
            }
        }
        let pair = ContrastivePair::new("x", vec!["a".into()], vec!["b".into()]).unwrap();
        let out = judge_contrastive("c d", &pair, &Constant, &TokenizerConfig::default()).unwrap();
        assert_eq!(out.scores.correct, out.scores.foil);
        assert!(out.pass);
    }
}
