//! Prompt templates and placeholder substitution.
//!
//! Templates are plain text with `{name}` placeholders:
//!
//! | placeholder | replaced with |
//! |---|---|
//! | `{property}` | the property's human label |
//! | `{src_lang}`, `{tgt_lang}` | language names (`English`, `German`, ...) |
//! | `{src_tag}`, `{tgt_tag}` | the raw language tags (`en`, `de`, ...) |
//! | `{demo_1}`, `{demo_2}`, ... | source-sentence demonstrations |
//! | `{value}` | the property value a candidate prompt asks about |
//! | `{sentence}` | the full source sentence containing the value |
//!
//! `{source_lang}`/`{target_lang}` and `{src_lang_name}`/`{tgt_lang_name}`
//! are accepted as aliases of the language names.

use super::GenError;

/// Default prompt for generating bracket-tagged source sentences.
pub const SOURCE_SENTENCES: &str = "\
You are an assistant that generates sentences where only appears one B = {property}.
Don't be repetitive, change the topic and B between sentences. Write every B inside [].
B must happen only once in each sentence and can only contain {property}.

Write 3 examples.

- {demo_1}
- {demo_2}
- {demo_3}

Now write 10 more diverse sentences itemizing them with '-':
";

/// English name for common language tags; unknown tags are returned as is.
pub fn language_name(tag: &str) -> &str {
    let primary = tag.split(['-', '_']).next().unwrap_or(tag);
    match primary.to_ascii_lowercase().as_str() {
        "en" => "English",
        "de" => "German",
        "es" => "Spanish",
        "ja" => "Japanese",
        "fr" => "French",
        "it" => "Italian",
        "pt" => "Portuguese",
        "nl" => "Dutch",
        "zh" => "Chinese",
        "ko" => "Korean",
        "ru" => "Russian",
        "ar" => "Arabic",
        "pl" => "Polish",
        "tr" => "Turkish",
        "sv" => "Swedish",
        "cs" => "Czech",
        "hi" => "Hindi",
        _ => tag,
    }
}

/// Placeholder names in order of appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                if !name.is_empty()
                    && name
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
                {
                    out.push(name);
                    rest = &after[close + 1..];
                } else {
                    rest = after;
                }
            }
            None => break,
        }
    }
    out
}

/// Number of demonstrations a template needs (highest `{demo_i}` index).
pub fn demo_slots(template: &str) -> usize {
    placeholders(template)
        .iter()
        .filter_map(|p| p.strip_prefix("demo_")?.parse::<usize>().ok())
        .max()
        .unwrap_or(0)
}

/// Substitutes placeholders; any placeholder without a binding is an error.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, GenError> {
    for name in placeholders(template) {
        if !vars.iter().any(|(k, _)| *k == name) {
            return Err(GenError::UnknownPlaceholder(name.to_string()));
        }
    }
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    Ok(out)
}
