//! Keyphrase extraction for main concepts.
//!
//! Graph-based co-occurrence ranking: candidate phrases are maximal runs of
//! non-stop-word tokens (runs also break at punctuation). Token centralities
//! come from a symmetric co-occurrence graph over the stop-word-filtered
//! token sequence with a window of 4, iterated with damping 0.85 to a
//! tolerance of 1e-6 (at most 100 iterations). A phrase scores the sum of its
//! token centralities. Everything is deterministic: ties break by first
//! occurrence position, and all iteration orders are fixed.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::stopwords::is_stopword;
use crate::text::{tokenize_words, WordToken};

const DAMPING: f64 = 0.85;
const TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;
const WINDOW: usize = 4;

/// A candidate phrase with its centrality score and the character position
/// of its first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPhrase {
    /// Phrase as written at its first occurrence (internal whitespace
    /// collapsed to single spaces).
    pub text: String,
    pub score: f64,
    pub first_pos: usize,
}

/// Extracts up to `max_concepts` ranked keyphrases from a text. Text with no
/// non-stop-word tokens yields an empty list.
pub fn extract_main_concepts(text: &str, max_concepts: usize) -> Vec<RankedPhrase> {
    let tokens = tokenize_words(text);
    let keep: Vec<bool> = tokens.iter().map(|t| !is_stopword(&t.lower)).collect();

    // Filtered token stream for the co-occurrence graph.
    let filtered: Vec<&WordToken> = tokens
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| t)
        .collect();
    if filtered.is_empty() || max_concepts == 0 {
        return Vec::new();
    }

    let centrality = token_centralities(&filtered);

    // Candidate runs: consecutive kept tokens, broken at stop words and at
    // punctuation between tokens.
    let mut phrases: Vec<RankedPhrase> = Vec::new();
    let mut seen: alloc::collections::BTreeSet<String> = alloc::collections::BTreeSet::new();
    let mut run: Vec<&WordToken> = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let breaks_run = !keep[i] || (token.hard_break_before && !run.is_empty());
        if breaks_run {
            flush_run(&mut run, &centrality, &mut phrases, &mut seen);
        }
        if keep[i] {
            run.push(token);
        }
    }
    flush_run(&mut run, &centrality, &mut phrases, &mut seen);

    phrases.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.first_pos.cmp(&b.first_pos))
    });
    phrases.truncate(max_concepts);
    phrases
}

fn flush_run(
    run: &mut Vec<&WordToken>,
    centrality: &BTreeMap<String, f64>,
    phrases: &mut Vec<RankedPhrase>,
    seen: &mut alloc::collections::BTreeSet<String>,
) {
    if run.is_empty() {
        return;
    }
    let first = run[0];
    // Runs never span hard breaks, so the separators in the source are plain
    // whitespace; joining token texts with single spaces reproduces the
    // phrase as written, modulo collapsed spacing.
    let display: String = run
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let key = display.to_lowercase();
    let score: f64 = run
        .iter()
        .map(|t| centrality.get(&t.lower).copied().unwrap_or(0.0))
        .sum();
    if seen.insert(key) {
        phrases.push(RankedPhrase {
            text: display,
            score,
            first_pos: first.char_start,
        });
    }
    run.clear();
}

/// Weighted centrality over the co-occurrence graph of the filtered token
/// stream. Node and edge iteration orders are fixed by first occurrence, so
/// scores are bit-reproducible.
fn token_centralities(filtered: &[&WordToken]) -> BTreeMap<String, f64> {
    // Token → dense index, in first-occurrence order.
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for t in filtered {
        if !index.contains_key(t.lower.as_str()) {
            index.insert(&t.lower, order.len());
            order.push(&t.lower);
        }
    }
    let n = order.len();

    // Symmetric co-occurrence weights within the sliding window.
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for i in 0..filtered.len() {
        let a = index[filtered[i].lower.as_str()];
        for j in (i + 1)..filtered.len().min(i + WINDOW) {
            let b = index[filtered[j].lower.as_str()];
            if a == b {
                continue;
            }
            *adj[a].entry(b).or_insert(0.0) += 1.0;
            *adj[b].entry(a).or_insert(0.0) += 1.0;
        }
    }
    let out_sum: Vec<f64> = adj.iter().map(|edges| edges.values().sum()).collect();

    let mut scores = vec![1.0f64; n];
    for _ in 0..MAX_ITERATIONS {
        let mut next = vec![0.0f64; n];
        for (node, incoming) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (&neighbor, &weight) in &adj[node] {
                if out_sum[neighbor] > 0.0 {
                    acc += weight / out_sum[neighbor] * scores[neighbor];
                }
            }
            *incoming = (1.0 - DAMPING) + DAMPING * acc;
        }
        let delta = next
            .iter()
            .zip(&scores)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0f64, f64::max);
        scores = next;
        if delta < TOLERANCE {
            break;
        }
    }

    order
        .iter()
        .enumerate()
        .map(|(i, tok)| (String::from(*tok), scores[i]))
        .collect()
}
