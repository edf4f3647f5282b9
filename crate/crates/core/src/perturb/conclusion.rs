//! Rule-based conclusion flip: rewrite every accept-leaning rating token in a
//! review to its strong-reject form.
//!
//! The token set ships as data: numeric "Rating: N" lines with N >= 2, plus
//! verbal stances ("weak accept", "accept", "strong accept" and their rubric
//! phrasings). Tokens are matched at word boundaries in one left-to-right
//! pass with longest-phrase-first precedence, so "acceptance threshold" is
//! never touched and the operator is idempotent: no output token is itself
//! rewritable.

use serde::{Deserialize, Serialize};

use crate::corpus::ReviewDocument;

use super::EditRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConclusionRewrites {
    pub schema_version: u32,
    /// (accept-leaning phrase, strong-reject form), longest first.
    pub phrases: Vec<(String, String)>,
    pub rating_label: String,
    pub rating_replacement: String,
}

const DEFAULT_REWRITES_JSON: &str = include_str!("../../data/conclusion_rewrites.json");

impl ConclusionRewrites {
    pub fn default_table() -> ConclusionRewrites {
        serde_json::from_str(DEFAULT_REWRITES_JSON).expect("built-in rewrite table parses")
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

fn boundary_before(text: &str, i: usize) -> bool {
    i == 0 || !is_word_byte(text.as_bytes()[i - 1])
}

fn boundary_after(text: &str, end: usize) -> bool {
    end >= text.len() || !is_word_byte(text.as_bytes()[end])
}

/// One token rewrite performed by [`rewrite_rating_tokens`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRewrite {
    pub offset: usize,
    pub original: String,
    pub replacement: String,
}

/// Rewrite all rating tokens; bytes outside the matched tokens are unchanged.
pub fn rewrite_rating_tokens(
    text: &str,
    table: &ConclusionRewrites,
) -> (String, Vec<TokenRewrite>) {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut rewrites = Vec::new();
    let mut i = 0;
    'scan: while i < text.len() {
        // Numeric rule: "Rating:" + spaces + digits, flipped when N >= 2.
        if text[i..].starts_with(&table.rating_label) && boundary_before(text, i) {
            let mut j = i + table.rating_label.len();
            while j < text.len() && (bytes[j] == b' ' || bytes[j] == b'\t') {
                j += 1;
            }
            let digits_start = j;
            while j < text.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits_start {
                let value: u32 = text[digits_start..j].parse().unwrap_or(0);
                if value >= 2 {
                    rewrites.push(TokenRewrite {
                        offset: i,
                        original: text[i..j].to_string(),
                        replacement: table.rating_replacement.clone(),
                    });
                    out.push_str(&table.rating_replacement);
                    i = j;
                    continue 'scan;
                }
            }
        }
        // Verbal stances, longest phrase first.
        if boundary_before(text, i) {
            for (phrase, replacement) in &table.phrases {
                if text[i..].starts_with(phrase.as_str()) && boundary_after(text, i + phrase.len())
                {
                    rewrites.push(TokenRewrite {
                        offset: i,
                        original: phrase.clone(),
                        replacement: replacement.clone(),
                    });
                    out.push_str(replacement);
                    i += phrase.len();
                    continue 'scan;
                }
            }
        }
        let next = text[i..].chars().next().unwrap();
        out.push(next);
        i += next.len_utf8();
    }
    (out, rewrites)
}

/// Flip a review's conclusion to strong reject.
///
/// Sets the overall rating to 1 and rewrites every rating token in the raw
/// text; a review already at 1 with no accept-leaning tokens comes back
/// unchanged. Idempotent by construction.
pub fn flip_conclusion(review: &ReviewDocument) -> (ReviewDocument, Vec<EditRecord>) {
    let table = ConclusionRewrites::default_table();
    let (rewritten, rewrites) = rewrite_rating_tokens(&review.raw_text, &table);
    if rewrites.is_empty() && review.overall_rating == 1 {
        return (review.clone(), Vec::new());
    }
    let mut flipped = review.clone();
    flipped.raw_text = rewritten;
    flipped.overall_rating = 1;
    // Raw text is authoritative after a text rewrite; resync keeps the
    // structured fields consistent where the raw text is parseable.
    let _ = flipped.resync_from_raw_text();
    flipped.overall_rating = 1;

    let records = rewrites
        .into_iter()
        .map(|rw| EditRecord {
            target_doc: format!("review:{}", review.review_id),
            start_anchor: rw.original.clone(),
            end_anchor: rw.original.clone(),
            replacement: rw.replacement,
            applied: true,
            failure_reason: None,
        })
        .collect();
    (flipped, records)
}
