//! Case folding, sentence normalization and tokenization.
//!
//! Everything that compares strings "case-insensitively" goes through
//! [`fold`], which applies full Unicode case folding (so `"Straße"` and
//! `"STRASSE"` fold to the same string). Tokenization is shared by the
//! contrastive detector and the diversity metric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
}

/// Full Unicode case folding.
pub fn fold(text: &str) -> String {
    caseless::default_case_fold_str(text)
}

/// Trim, collapse internal whitespace runs to one space, then case-fold.
pub fn normalize_sentence(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    fold(&collapsed)
}

/// Punctuation removed from token edges when `strip_edge_punct` is set.
pub fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '¡' | '¿'
                | '«'
                | '»'
                | '‹'
                | '›'
                | '“'
                | '”'
                | '„'
                | '‘'
                | '’'
                | '‚'
                | '…'
                | '–'
                | '—'
                | '。'
                | '、'
                | '，'
                | '．'
                | '！'
                | '？'
                | '：'
                | '；'
                | '「'
                | '」'
                | '『'
                | '』'
                | '（'
                | '）'
                | '【'
                | '】'
        )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenMode {
    /// Split on Unicode whitespace; grams are re-joined with single spaces.
    #[default]
    Whitespace,
    /// Every non-whitespace character is a token; grams are concatenated.
    /// Meant for scripts written without spaces.
    Character,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub mode: TokenMode,
    pub strip_edge_punct: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            mode: TokenMode::Whitespace,
            strip_edge_punct: true,
        }
    }
}

impl TokenizerConfig {
    pub fn whitespace() -> Self {
        Self::default()
    }

    pub fn character() -> Self {
        Self {
            mode: TokenMode::Character,
            strip_edge_punct: true,
        }
    }

    pub fn tokens<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self.mode {
            TokenMode::Whitespace => text
                .split_whitespace()
                .map(|tok| {
                    if self.strip_edge_punct {
                        tok.trim_matches(is_edge_punct)
                    } else {
                        tok
                    }
                })
                .filter(|tok| !tok.is_empty())
                .collect(),
            TokenMode::Character => {
                let body = if self.strip_edge_punct {
                    text.trim_matches(|c: char| c.is_whitespace() || is_edge_punct(c))
                } else {
                    text
                };
                body.char_indices()
                    .filter(|(_, c)| !c.is_whitespace())
                    .map(|(i, c)| &body[i..i + c.len_utf8()])
                    .collect()
            }
        }
    }

    pub fn join(&self, tokens: &[&str]) -> String {
        match self.mode {
            TokenMode::Whitespace => tokens.join(" "),
            TokenMode::Character => tokens.concat(),
        }
    }

    pub fn token_count(&self, text: &str) -> usize {
        self.tokens(text).len()
    }
}

/// All contiguous `n`-token windows. Empty when there are fewer than `n` tokens.
pub fn token_windows(tokens: &[&str], n: usize, tok: &TokenizerConfig) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| tok.join(w)).collect()
}

/// N-grams of `text` used by the contrastive detector.
///
/// When the text has fewer than `n` tokens the whole tokenized text is
/// returned as the single gram. Text without any tokens yields no grams.
pub fn ngrams(text: &str, n: usize, tok: &TokenizerConfig) -> Result<Vec<String>, TextError> {
    if n == 0 {
        return Err(TextError::ZeroOrder);
    }
    let tokens = tok.tokens(text);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    if tokens.len() < n {
        return Ok(vec![tok.join(&tokens)]);
    }
    Ok(token_windows(&tokens, n, tok))
}
