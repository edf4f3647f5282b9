//! Tolerant extraction of scores, decisions, and text sections from role
//! responses. Labeled lines match case-insensitively; the first match per
//! field wins; values must be integers ("8", "8/10", "8: accept, good paper"
//! all read as 8).

use super::FinalDecision;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldIssue {
    Missing(String),
    Invalid { field: String, detail: String },
}

impl std::fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldIssue::Missing(field) => write!(f, "missing {field}"),
            FieldIssue::Invalid { field, detail } => write!(f, "invalid {field}: {detail}"),
        }
    }
}

fn strip_markup(line: &str) -> &str {
    line.trim_start_matches(['#', '*', '-', '>', ' ', '\t'])
        .trim_end()
}

/// First line starting with `label` (case-insensitive), returned as the text
/// after the label with any separator trimmed.
fn labeled_value<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    let label_lower = label.to_lowercase();
    for line in text.lines() {
        let stripped = strip_markup(line);
        if stripped.len() >= label.len()
            && stripped[..label.len()].eq_ignore_ascii_case(&label_lower)
        {
            let rest = stripped[label.len()..].trim_start_matches('*');
            // Require a separator or end of line so "Rating" does not match
            // "Ratings overview".
            let rest = match rest.chars().next() {
                None => rest,
                Some(':') | Some('=') => rest[1..].trim_start(),
                Some(c) if c.is_whitespace() => rest.trim_start(),
                _ => continue,
            };
            // Trim a second separator ("Rating: = 6" is unlikely but cheap).
            let rest = rest.trim_start_matches([':', '=']).trim_start();
            return Some(rest);
        }
    }
    None
}

/// Integer score from the first line labeled `label`, range-checked.
pub fn extract_score(text: &str, label: &str, lo: i32, hi: i32) -> Result<i32, FieldIssue> {
    let value = labeled_value(text, label).ok_or_else(|| FieldIssue::Missing(label.to_string()))?;
    let digits: String = value.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Err(FieldIssue::Invalid {
            field: label.to_string(),
            detail: format!("non-numeric value {value:?}"),
        });
    }
    let parsed: i32 = digits.parse().map_err(|_| FieldIssue::Invalid {
        field: label.to_string(),
        detail: format!("unparsable integer {digits:?}"),
    })?;
    if parsed < lo || parsed > hi {
        return Err(FieldIssue::Invalid {
            field: label.to_string(),
            detail: format!("{parsed} outside [{lo}, {hi}]"),
        });
    }
    Ok(parsed)
}

/// Final decision from the first line labeled "Final Decision".
pub fn extract_decision(text: &str) -> Result<FinalDecision, FieldIssue> {
    let value = labeled_value(text, "Final Decision")
        .ok_or_else(|| FieldIssue::Missing("Final Decision".to_string()))?;
    let lowered = value.to_lowercase();
    if lowered.contains("spotlight") {
        Ok(FinalDecision::AcceptSpotlight)
    } else if lowered.contains("oral") {
        Ok(FinalDecision::AcceptOral)
    } else if lowered.contains("poster") {
        Ok(FinalDecision::AcceptPoster)
    } else if lowered.contains("reject") {
        Ok(FinalDecision::Reject)
    } else if lowered.contains("accept") {
        Ok(FinalDecision::AcceptPoster)
    } else {
        Err(FieldIssue::Invalid {
            field: "Final Decision".to_string(),
            detail: format!("unrecognized decision {value:?}"),
        })
    }
}

/// Text between the first line labeled `label` and the next of `stop_labels`
/// (empty string when the section is absent).
pub fn extract_section(text: &str, label: &str, stop_labels: &[&str]) -> String {
    let label_lower = label.to_lowercase();
    let mut collecting = false;
    let mut collected: Vec<&str> = Vec::new();
    for line in text.lines() {
        let stripped = strip_markup(line);
        let starts_with = |candidate: &str| {
            stripped.len() >= candidate.len()
                && stripped[..candidate.len()].eq_ignore_ascii_case(candidate)
        };
        if !collecting {
            if starts_with(&label_lower) {
                collecting = true;
                // Same-line content after "Label:", tolerating plural forms
                // ("Weaknesses:" for label "Weakness") and bold markers.
                let rest = stripped[label.len()..]
                    .trim_start_matches(|c: char| c.is_ascii_alphabetic() || c == '*')
                    .trim_start_matches([':', '='])
                    .trim();
                if !rest.is_empty() {
                    collected.push(rest);
                }
            }
            continue;
        }
        if stop_labels.iter().any(|stop| starts_with(stop)) {
            break;
        }
        collected.push(line);
    }
    collected.join("\n").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_accepts_decorated_values() {
        assert_eq!(
            extract_score(
                "Overall Score: 6 = marginally above",
                "Overall Score",
                1,
                10
            )
            .unwrap(),
            6
        );
        assert_eq!(extract_score("Rating: 8/10", "Rating", 1, 10).unwrap(), 8);
        assert_eq!(
            extract_score("rating: 8: accept, good paper", "Rating", 1, 10).unwrap(),
            8
        );
        assert_eq!(extract_score("**Rating** 7", "Rating", 1, 10).unwrap(), 7);
    }

    #[test]
    fn score_rejects_non_numeric() {
        let err = extract_score("Rating: ten", "Rating", 1, 10).unwrap_err();
        assert!(matches!(err, FieldIssue::Invalid { .. }));
    }

    #[test]
    fn score_rejects_out_of_range() {
        let err = extract_score("Contribution: 5", "Contribution", 1, 4).unwrap_err();
        assert!(matches!(err, FieldIssue::Invalid { .. }));
    }

    #[test]
    fn first_match_wins() {
        let text = "Rating: 8\nsome prose\nRating: 3\n";
        assert_eq!(extract_score(text, "Rating", 1, 10).unwrap(), 8);
    }

    #[test]
    fn missing_label_is_reported() {
        let err = extract_score("no scores here", "Rating", 1, 10).unwrap_err();
        assert_eq!(err, FieldIssue::Missing("Rating".to_string()));
    }

    #[test]
    fn label_requires_a_boundary() {
        // "Ratings" must not satisfy the "Rating" label.
        let err = extract_score("Ratings overview: 9", "Rating", 1, 10).unwrap_err();
        assert!(matches!(err, FieldIssue::Missing(_)));
    }

    #[test]
    fn decisions_parse_case_insensitively() {
        assert_eq!(
            extract_decision("Final Decision: Accept as Spotlight").unwrap(),
            FinalDecision::AcceptSpotlight
        );
        assert_eq!(
            extract_decision("final decision: REJECT").unwrap(),
            FinalDecision::Reject
        );
        assert_eq!(
            extract_decision("Final Decision: Accept as Oral").unwrap(),
            FinalDecision::AcceptOral
        );
    }

    #[test]
    fn sections_stop_at_the_next_label() {
        let text =
            "Summary:\nA paper.\nMore summary.\nStrengths:\nGood.\nWeaknesses:\nBad.\nRating: 6\n";
        assert_eq!(
            extract_section(text, "Summary", &["strengths", "weaknesses"]),
            "A paper.\nMore summary."
        );
        assert_eq!(extract_section(text, "Strengths", &["weaknesses"]), "Good.");
    }
}
