//! Sentence normalization and target-span lookup.

use alloc::string::String;
use alloc::vec::Vec;

const QUOTES: [char; 6] = ['"', '\'', '\u{201C}', '\u{201D}', '\u{2018}', '\u{2019}'];

/// Removes straight and typographic quotes, collapses whitespace runs to a
/// single space and trims both ends. Every other character is kept.
pub fn preprocess_sentence(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        if QUOTES.contains(&ch) {
            continue;
        }
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(ch);
    }
    out
}

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Byte span of the first case-insensitive occurrence of `needle` in
/// `haystack`. Comparison is per character (full lowercase mapping), so the
/// span always falls on character boundaries of `haystack`.
pub fn find_case_insensitive(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return None;
    }
    for (start, _) in haystack.char_indices() {
        let mut hay = haystack[start..].char_indices();
        let mut matched = true;
        let mut end = start;
        for n in needle.chars() {
            match hay.next() {
                Some((off, h)) if chars_eq_ci(h, n) => end = start + off + h.len_utf8(),
                _ => {
                    matched = false;
                    break;
                }
            }
        }
        if matched {
            return Some((start, end));
        }
    }
    None
}

/// Lowercased whitespace tokens with leading/trailing non-alphanumeric
/// characters stripped; tokens that become empty are dropped.
pub fn graph_tokens(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}
