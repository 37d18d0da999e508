//! Parsing of constrained LLM replies.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{Layer, LayerSet};
use crate::prompt::MAX_OPTIONS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnswerError {
    #[error("could not map reply to a single option: {raw:?}")]
    AnswerUnparseable { raw: String },
    #[error("answer parsing needs 2 to {MAX_OPTIONS} options, got {0}")]
    InvalidOptions(usize),
}

/// Option index from a letter, if it names one of `n_options`.
fn letter_index(c: char, n_options: usize) -> Option<usize> {
    let upper = c.to_ascii_uppercase();
    let idx = (upper as u32).checked_sub('A' as u32)? as usize;
    (upper.is_ascii_uppercase() && idx < n_options).then_some(idx)
}

/// Rule 1: the whole reply is one letter, optionally in parentheses and/or
/// followed by periods.
fn bare_letter(raw: &str, n: usize) -> Option<usize> {
    let mut s = raw.trim().trim_end_matches('.').trim();
    if let Some(inner) = s.strip_prefix('(') {
        s = inner.strip_suffix(')')?;
    } else if let Some(inner) = s.strip_suffix(')') {
        s = inner;
    }
    let mut chars = s.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => letter_index(c, n),
        _ => None,
    }
}

/// Rule 2: exactly one distinct letter appears as `(X)` or after
/// `answer is`.
fn marked_letter(raw: &str, n: usize) -> Option<usize> {
    let mut found: Vec<usize> = Vec::new();
    let bytes = raw.as_bytes();
    for i in 0..bytes.len().saturating_sub(2) {
        if bytes[i] == b'(' && bytes[i + 2] == b')' && bytes[i + 1].is_ascii_uppercase() {
            if let Some(idx) = letter_index(bytes[i + 1] as char, n) {
                found.push(idx);
            }
        }
    }
    let lower = raw.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find("answer is") {
        let after = from + pos + "answer is".len();
        from = after;
        let rest = raw[after..].trim_start();
        let rest = rest.strip_prefix(':').unwrap_or(rest).trim_start();
        let rest = rest.strip_prefix('(').unwrap_or(rest);
        let mut chars = rest.chars();
        if let Some(c) = chars.next().filter(char::is_ascii_uppercase) {
            let bounded = chars.next().is_none_or(|next| !next.is_alphanumeric());
            if let (true, Some(idx)) = (bounded, letter_index(c, n)) {
                found.push(idx);
            }
        }
    }
    found.sort_unstable();
    found.dedup();
    match found.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

/// Rule 3: exactly one option text occurs in the reply, ignoring case.
fn option_text(raw: &str, options: &[String]) -> Option<usize> {
    let lower = raw.to_lowercase();
    let mut hits = options
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.trim().is_empty() && lower.contains(&o.trim().to_lowercase()))
        .map(|(i, _)| i);
    match (hits.next(), hits.next()) {
        (Some(i), None) => Some(i),
        _ => None,
    }
}

/// Maps a raw reply to an option index. Rules are tried in order and the
/// first one that matches decides.
pub fn parse_answer(raw: &str, options: &[String]) -> Result<usize, AnswerError> {
    let n = options.len();
    if !(2..=MAX_OPTIONS).contains(&n) {
        return Err(AnswerError::InvalidOptions(n));
    }
    bare_letter(raw, n)
        .or_else(|| marked_letter(raw, n))
        .or_else(|| option_text(raw, options))
        .ok_or_else(|| AnswerError::AnswerUnparseable { raw: raw.into() })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("agent reply names no offered layer: {raw:?}")]
pub struct SelectionUnparseable {
    pub raw: String,
}

/// Reads a comma-separated list of layer names, keeping those in
/// `inventory`. Unknown names are dropped.
pub fn parse_agent_selection(raw: &str, inventory: LayerSet) -> Result<LayerSet, SelectionUnparseable> {
    let selected: LayerSet = raw
        .split([',', ';', '\n'])
        .filter_map(|token| {
            let cleaned: String = token
                .trim()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .chars()
                .map(|c| match c {
                    ' ' | '-' => '_',
                    c => c.to_ascii_lowercase(),
                })
                .collect();
            Layer::from_name(&cleaned)
        })
        .collect();
    let selected = selected.intersection(inventory);
    if selected.is_empty() {
        return Err(SelectionUnparseable { raw: raw.into() });
    }
    Ok(selected)
}
