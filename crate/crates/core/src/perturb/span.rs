//! Anchor-addressed span location and replacement.
//!
//! An edit names the first words and last words of the region it rewrote.
//! Matching normalizes whitespace runs and compares case-sensitively; the
//! located range in the original text runs from the first byte of the start
//! anchor to the last byte of the end anchor.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("start anchor not found")]
    StartNotFound,
    #[error("end anchor not found after the start anchor")]
    EndNotFound,
    #[error("start anchor occurs {count} times (more than 3)")]
    AmbiguousStart { count: usize },
    #[error("empty anchor")]
    EmptyAnchor,
}

/// Non-whitespace runs with their byte offsets.
fn words_with_offsets(text: &str) -> Vec<(usize, &str)> {
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                words.push((s, &text[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        words.push((s, &text[s..]));
    }
    words
}

fn word_sequence_matches(words: &[(usize, &str)], at: usize, anchor: &[&str]) -> bool {
    words.len() - at >= anchor.len()
        && anchor
            .iter()
            .zip(&words[at..at + anchor.len()])
            .all(|(a, (_, w))| a == w)
}

/// Byte range of the span addressed by (start_anchor, end_anchor).
///
/// The range begins at the first occurrence of the start anchor that is
/// closed by a following occurrence of the end anchor. Up to three start
/// occurrences are tried in document order; more than three is ambiguous and
/// the edit is refused rather than risking a rewrite of distant text.
pub fn locate_span(
    doc_text: &str,
    start_anchor: &str,
    end_anchor: &str,
) -> Result<Range<usize>, SpanError> {
    let start_words: Vec<&str> = start_anchor.split_whitespace().collect();
    let end_words: Vec<&str> = end_anchor.split_whitespace().collect();
    if start_words.is_empty() || end_words.is_empty() {
        return Err(SpanError::EmptyAnchor);
    }

    let words = words_with_offsets(doc_text);
    let start_positions: Vec<usize> = (0..words.len())
        .filter(|&i| word_sequence_matches(&words, i, &start_words))
        .collect();
    if start_positions.is_empty() {
        return Err(SpanError::StartNotFound);
    }
    if start_positions.len() > 3 {
        return Err(SpanError::AmbiguousStart {
            count: start_positions.len(),
        });
    }

    for &start_pos in &start_positions {
        let start_last = start_pos + start_words.len() - 1;
        // The end anchor may overlap the start anchor but the span must
        // contain the whole start anchor.
        let end_match = (start_pos..words.len()).find(|&j| {
            word_sequence_matches(&words, j, &end_words) && j + end_words.len() > start_last
        });
        if let Some(end_pos) = end_match {
            let (span_start, _) = words[start_pos];
            let (last_off, last_word) = words[end_pos + end_words.len() - 1];
            return Ok(span_start..last_off + last_word.len());
        }
    }
    Err(SpanError::EndNotFound)
}

/// Replace the located span; every byte outside the range is untouched.
pub fn apply_replacement(
    doc_text: &str,
    start_anchor: &str,
    end_anchor: &str,
    replacement: &str,
) -> Result<(String, Range<usize>), SpanError> {
    let range = locate_span(doc_text, start_anchor, end_anchor)?;
    let mut out = String::with_capacity(doc_text.len() + replacement.len());
    out.push_str(&doc_text[..range.start]);
    out.push_str(replacement);
    out.push_str(&doc_text[range.end..]);
    Ok((out, range))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_simple_span() {
        let range = locate_span("alpha beta gamma delta", "beta", "gamma").unwrap();
        assert_eq!(&"alpha beta gamma delta"[range], "beta gamma");
    }

    #[test]
    fn whole_document_span() {
        let doc = "alpha beta gamma delta";
        let range = locate_span(doc, "alpha beta", "gamma delta").unwrap();
        assert_eq!(range, 0..doc.len());
    }

    #[test]
    fn missing_start_anchor() {
        assert_eq!(
            locate_span("alpha beta", "zeta", "beta").unwrap_err(),
            SpanError::StartNotFound
        );
    }

    #[test]
    fn missing_end_after_start() {
        assert_eq!(
            locate_span("alpha beta gamma", "gamma", "alpha").unwrap_err(),
            SpanError::EndNotFound
        );
    }

    #[test]
    fn whitespace_runs_collapse_for_matching() {
        let doc = "alpha  beta\n\tgamma delta";
        let range = locate_span(doc, "beta gamma", "gamma").unwrap();
        assert_eq!(&doc[range], "beta\n\tgamma");
    }

    #[test]
    fn matching_is_case_sensitive() {
        assert_eq!(
            locate_span("Alpha beta", "alpha", "beta").unwrap_err(),
            SpanError::StartNotFound
        );
    }

    #[test]
    fn ambiguous_start_is_refused() {
        let doc = "x a x a x a x a x";
        assert_eq!(
            locate_span(doc, "a", "x").unwrap_err(),
            SpanError::AmbiguousStart { count: 4 }
        );
    }

    #[test]
    fn repeated_start_anchor_takes_the_first_closable_occurrence() {
        // "a b" occurs twice (within the 3-occurrence bound); the first
        // occurrence already closes with the following "z", so it wins.
        let doc = "a b c a b z";
        let range = locate_span(doc, "a b", "z").unwrap();
        assert_eq!(&doc[range], "a b c a b z");
    }

    #[test]
    fn identical_anchors_address_one_word() {
        let doc = "alpha beta gamma";
        let range = locate_span(doc, "beta", "beta").unwrap();
        assert_eq!(&doc[range], "beta");
    }

    #[test]
    fn replacement_changes_only_the_span() {
        let (out, range) =
            apply_replacement("alpha beta gamma delta", "beta", "gamma", "X").unwrap();
        assert_eq!(out, "alpha X delta");
        assert_eq!(range, 6..16);
    }

    #[test]
    fn identity_replacement_is_a_no_op() {
        let doc = "alpha beta gamma delta";
        let (out, _) = apply_replacement(doc, "beta", "gamma", "beta gamma").unwrap();
        assert_eq!(out, doc);
    }

    #[test]
    fn failed_location_leaves_no_output() {
        let doc = "alpha beta";
        assert!(apply_replacement(doc, "zeta", "beta", "X").is_err());
    }
}
