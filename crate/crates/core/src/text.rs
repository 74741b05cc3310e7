//! Shared text utilities: whitespace normalization, normalized substring
//! search with offset mapping, sentence boundaries, tokenization, and the
//! FNV-1a hash used for embedder indices and prompt fingerprints.

use alloc::string::String;
use alloc::vec::Vec;

/// Collapses runs of whitespace to single spaces and trims the ends.
///
/// This is the normalization applied before any grounding or citation
/// comparison; comparisons stay case-sensitive.
pub fn normalize_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for ch in s.trim().chars() {
        if ch.is_whitespace() {
            in_ws = true;
        } else {
            if in_ws && !out.is_empty() {
                out.push(' ');
            }
            in_ws = false;
            out.push(ch);
        }
    }
    out
}

/// Finds the first whitespace-normalized occurrence of `needle` in
/// `haystack` and maps it back to character offsets in the original text.
///
/// Returns `(start, end)` character (not byte) positions such that the
/// original slice at `[start, end)` normalizes to the normalized needle.
pub fn normalized_find(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    let needle_norm = normalize_ws(needle);
    if needle_norm.is_empty() {
        return None;
    }

    // Normalized haystack alongside a map from each normalized char to the
    // char index it came from in the original text.
    let mut norm = String::new();
    let mut map: Vec<usize> = Vec::new();
    let mut in_ws = false;
    for (ci, ch) in haystack.chars().enumerate() {
        if ch.is_whitespace() {
            in_ws = true;
        } else {
            if in_ws && !norm.is_empty() {
                norm.push(' ');
                // A collapsed space maps to the char that follows it; the
                // span arithmetic below only dereferences non-space ends.
                map.push(ci);
            }
            in_ws = false;
            norm.push(ch);
            map.push(ci);
        }
    }

    let byte_start = norm.find(&needle_norm)?;
    let char_start = norm[..byte_start].chars().count();
    let char_len = needle_norm.chars().count();
    let start = map[char_start];
    let end = map[char_start + char_len - 1] + 1;
    Some((start, end))
}

/// Slices a string by character offsets.
pub fn char_slice(s: &str, start: usize, end: usize) -> String {
    s.chars()
        .skip(start)
        .take(end.saturating_sub(start))
        .collect()
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Character offsets immediately after each sentence end (the terminator plus
/// any following whitespace belongs to the preceding sentence).
pub fn sentence_boundaries(s: &str) -> Vec<usize> {
    let chars: Vec<char> = s.chars().collect();
    let mut bounds = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if is_sentence_end(chars[i]) {
            let mut j = i + 1;
            while j < chars.len() && is_sentence_end(chars[j]) {
                j += 1;
            }
            if j >= chars.len() || chars[j].is_whitespace() {
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                bounds.push(j);
                i = j;
                continue;
            }
        }
        i += 1;
    }
    bounds
}

/// First sentence of a text, trimmed; the whole text when no sentence
/// terminator is found.
pub fn first_sentence(s: &str) -> String {
    let trimmed = s.trim();
    match sentence_boundaries(trimmed).first() {
        Some(&end) => {
            let head = char_slice(trimmed, 0, end);
            String::from(head.trim_end())
        }
        None => String::from(trimmed),
    }
}

/// A word token with its position in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordToken {
    /// Token text as written in the source.
    pub text: String,
    /// Lowercased form used for matching and scoring.
    pub lower: String,
    /// Character offset of the first character.
    pub char_start: usize,
    /// True when a non-space separator (punctuation, newline) precedes this
    /// token; used to break candidate phrase runs.
    pub hard_break_before: bool,
}

/// Splits text into word tokens. Alphanumerics and apostrophes form tokens;
/// anything else separates them, and separators other than plain spaces or
/// tabs mark a hard break before the next token.
pub fn tokenize_words(s: &str) -> Vec<WordToken> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    let mut pending_break = false;
    for (ci, ch) in s.chars().enumerate() {
        if ch.is_alphanumeric() || ch == '\'' {
            if current.is_empty() {
                start = ci;
            }
            current.push(ch);
        } else {
            if !current.is_empty() {
                push_token(&mut tokens, &mut current, start, &mut pending_break);
            }
            if !(ch == ' ' || ch == '\t') {
                pending_break = true;
            }
        }
    }
    if !current.is_empty() {
        push_token(&mut tokens, &mut current, start, &mut pending_break);
    }
    tokens
}

fn push_token(
    tokens: &mut Vec<WordToken>,
    current: &mut String,
    start: usize,
    pending_break: &mut bool,
) {
    let text = core::mem::take(current);
    let lower = text.to_lowercase();
    tokens.push(WordToken {
        text,
        lower,
        char_start: start,
        hard_break_before: core::mem::take(pending_break),
    });
}

/// Byte offset of a 1-based (line, column) position, for error reports from
/// parsers that speak line/column.
pub(crate) fn line_col_to_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current_line = 1;
    let mut offset = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if current_line == line {
            offset = i;
            break;
        }
        if b == b'\n' {
            current_line += 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
