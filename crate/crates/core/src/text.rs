//! Anchoring model-produced strings into the source sentence.
//!
//! Offsets count Unicode scalar values (`char`s), not bytes.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Half-open character range `[start, end)` of a sentence plus its text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl TextSpan {
    /// Builds the span `[start, end)` of `sentence`, or `None` if out of range or empty.
    pub fn from_offsets(sentence: &str, start: usize, end: usize) -> Option<Self> {
        if start >= end {
            return None;
        }
        let surface: String = sentence.chars().skip(start).take(end - start).collect();
        if surface.chars().count() != end - start {
            return None;
        }
        Some(Self { start, end, surface })
    }

    /// Checks `0 <= start < end <= len(sentence)` and `sentence[start..end] == surface`.
    pub fn is_valid_in(&self, sentence: &str) -> bool {
        Self::from_offsets(sentence, self.start, self.end).is_some_and(|s| s.surface == self.surface)
    }
}

/// Anchors `needle` in `sentence`.
///
/// The first exact occurrence wins; failing that, the first case-insensitive
/// occurrence (compared character by character, so offsets stay aligned).
/// The returned surface is the sentence's own text.
pub fn normalize_trigger(needle: &str, sentence: &str) -> Option<TextSpan> {
    let needle: Vec<char> = needle.chars().collect();
    if needle.is_empty() {
        return None;
    }
    let hay: Vec<char> = sentence.chars().collect();
    if needle.len() > hay.len() {
        return None;
    }
    let windows = || hay.windows(needle.len()).enumerate();
    let found = windows().find(|(_, w)| *w == needle.as_slice()).or_else(|| {
        windows().find(|(_, w)| {
            w.iter()
                .zip(&needle)
                .all(|(a, b)| a == b || a.to_lowercase().eq(b.to_lowercase()))
        })
    });
    found.map(|(start, w)| TextSpan {
        start,
        end: start + needle.len(),
        surface: w.iter().collect(),
    })
}

/// Lowercases and collapses runs of whitespace, for string-level matching.
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}
