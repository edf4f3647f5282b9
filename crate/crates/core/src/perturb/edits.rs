//! Parsing of span-edit blocks from perturbation responses and their
//! application to a document.
//!
//! A response carries one or more blocks of the form
//!
//! ```text
//! 1.Text Span to Edit
//! -Start Words: ...
//! -Ending Words: ...
//! 2. Edited Text Span
//! <replacement text>
//! ```
//!
//! Blocks are located against the original document and applied back to
//! front by document position so earlier ranges stay valid; edits whose
//! anchors fail to locate (or that overlap an already-applied range) are
//! skipped and logged, never guessed at.

use std::ops::Range;

use super::span::{apply_replacement, locate_span};
use super::EditRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedEdit {
    pub start_anchor: String,
    pub end_anchor: String,
    pub replacement: String,
}

fn line_value<'a>(chunk: &'a str, label: &str) -> Option<&'a str> {
    let lower = chunk.to_lowercase();
    let label_lower = label.to_lowercase();
    let pos = lower.find(&label_lower)?;
    let after = &chunk[pos + label.len()..];
    let line_end = after.find('\n').unwrap_or(after.len());
    Some(
        after[..line_end]
            .trim_start_matches([':', ' ', '\t'])
            .trim(),
    )
}

/// Extract every well-formed edit block; malformed blocks are dropped.
pub fn parse_edit_blocks(response: &str) -> Vec<ParsedEdit> {
    const BLOCK_MARKER: &str = "text span to edit";
    const REPLACEMENT_MARKER: &str = "edited text span";

    let lower = response.to_lowercase();
    let mut block_starts: Vec<usize> = Vec::new();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(BLOCK_MARKER) {
        block_starts.push(from + pos);
        from += pos + BLOCK_MARKER.len();
    }

    let mut edits = Vec::new();
    for (i, &start) in block_starts.iter().enumerate() {
        let end = block_starts
            .get(i + 1)
            .copied()
            // The next block's numbering ("1.") sits just before the marker;
            // cutting at the marker itself only leaves that prefix in the
            // replacement, which is trimmed below.
            .unwrap_or(response.len());
        let chunk = &response[start..end];

        let Some(start_anchor) = line_value(chunk, "Start Words") else {
            continue;
        };
        let Some(end_anchor) = line_value(chunk, "Ending Words") else {
            continue;
        };
        let chunk_lower = chunk.to_lowercase();
        let Some(marker_pos) = chunk_lower.find(REPLACEMENT_MARKER) else {
            continue;
        };
        let mut replacement = chunk[marker_pos + REPLACEMENT_MARKER.len()..]
            .trim_start_matches([':', ' '])
            .trim_start_matches('\n')
            .trim_end();
        // A following block leaves its "1." numbering at the tail of this
        // chunk; strip it only when it is alone on the final line.
        if i + 1 < block_starts.len() {
            if let Some(last_newline) = replacement.rfind('\n') {
                let last_line = replacement[last_newline..].trim();
                if !last_line.is_empty()
                    && last_line
                        .chars()
                        .all(|c| c.is_ascii_digit() || c == '.' || c == ')')
                {
                    replacement = replacement[..last_newline].trim_end();
                }
            }
        }
        if start_anchor.is_empty() || end_anchor.is_empty() || replacement.is_empty() {
            continue;
        }
        edits.push(ParsedEdit {
            start_anchor: start_anchor.to_string(),
            end_anchor: end_anchor.to_string(),
            replacement: replacement.to_string(),
        });
    }
    edits
}

/// Apply parsed edits to a document, returning the new text plus one
/// [`EditRecord`] per edit in the original order.
pub fn apply_parsed_edits(
    doc_text: &str,
    target_doc: &str,
    edits: &[ParsedEdit],
) -> (String, Vec<EditRecord>) {
    // Locate everything against the original document first.
    let mut located: Vec<(usize, Result<Range<usize>, String>)> = edits
        .iter()
        .enumerate()
        .map(|(i, edit)| {
            let range = locate_span(doc_text, &edit.start_anchor, &edit.end_anchor)
                .map_err(|e| e.to_string());
            (i, range)
        })
        .collect();
    // Back to front by span start so earlier ranges stay valid.
    located.sort_by(|a, b| {
        let key = |entry: &(usize, Result<Range<usize>, String>)| match &entry.1 {
            Ok(range) => (0usize, usize::MAX - range.start),
            Err(_) => (1, entry.0),
        };
        key(a).cmp(&key(b))
    });

    let mut text = doc_text.to_string();
    let mut applied_ranges: Vec<Range<usize>> = Vec::new();
    let mut records: Vec<Option<EditRecord>> = vec![None; edits.len()];
    for (index, location) in located {
        let edit = &edits[index];
        let mut record = EditRecord {
            target_doc: target_doc.to_string(),
            start_anchor: edit.start_anchor.clone(),
            end_anchor: edit.end_anchor.clone(),
            replacement: edit.replacement.clone(),
            applied: false,
            failure_reason: None,
        };
        match location {
            Err(reason) => record.failure_reason = Some(reason),
            Ok(range) => {
                let overlaps = applied_ranges
                    .iter()
                    .any(|r| range.start < r.end && r.start < range.end);
                if overlaps {
                    record.failure_reason =
                        Some("span overlaps an already-applied edit".to_string());
                } else {
                    // Re-locate in the current text: only suffix bytes have
                    // moved, and this edit starts before every applied range.
                    match apply_replacement(
                        &text,
                        &edit.start_anchor,
                        &edit.end_anchor,
                        &edit.replacement,
                    ) {
                        Ok((new_text, _)) => {
                            text = new_text;
                            record.applied = true;
                            applied_ranges.push(range);
                        }
                        Err(e) => record.failure_reason = Some(e.to_string()),
                    }
                }
            }
        }
        records[index] = Some(record);
    }
    (text, records.into_iter().map(Option::unwrap).collect())
}
