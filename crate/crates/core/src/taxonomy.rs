//! Section-title relevance rules.
//!
//! Paper-level contribution and soundness edits only make sense in sections
//! that carry those aspects, so perturbation targeting runs every section
//! title through an ordered keyword ruleset. The shipped default ruleset is an
//! approximation; corpora can override it with their own rules file, and
//! titles that match nothing are surfaced for human triage rather than
//! guessed at.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PaperDocument;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("no section matches the {aspect} aspect")]
    NoTargets { aspect: PaperAspect },
    #[error("cannot read rules file {path}: {detail}")]
    BadRulesFile { path: String, detail: String },
}

/// Paper-mode perturbation aspects (the only ones that target sections).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaperAspect {
    Contribution,
    Soundness,
    Presentation,
}

impl std::fmt::Display for PaperAspect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PaperAspect::Contribution => "contribution",
            PaperAspect::Soundness => "soundness",
            PaperAspect::Presentation => "presentation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SectionRelevance {
    pub contribution: bool,
    pub soundness: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    /// Case-insensitive substring of the title.
    Substring,
    /// Case-insensitive whole-title match.
    Title,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeywordRule {
    pub pattern: String,
    #[serde(rename = "match")]
    pub match_kind: MatchKind,
    pub contribution: bool,
    pub soundness: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyRules {
    pub schema_version: u32,
    #[serde(default)]
    pub rules_source: String,
    /// Prompt used by the optional gateway-backed body classifier.
    #[serde(default)]
    pub body_classifier_prompt: String,
    pub rules: Vec<KeywordRule>,
    /// Exact (normalized) title -> relevance; takes precedence over rules.
    #[serde(default)]
    pub overrides: BTreeMap<String, SectionRelevance>,
}

const DEFAULT_RULES_JSON: &str = include_str!("../data/taxonomy_rules.json");

impl TaxonomyRules {
    pub fn default_rules() -> TaxonomyRules {
        serde_json::from_str(DEFAULT_RULES_JSON).expect("built-in taxonomy rules parse")
    }

    pub fn load(path: &Path) -> Result<TaxonomyRules, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|e| TaxonomyError::BadRulesFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| TaxonomyError::BadRulesFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }
}

fn normalize_title(title: &str) -> String {
    title.trim().to_lowercase()
}

/// Classify a section title. Overrides win over keyword rules; among keyword
/// rules the first match decides. Unknown titles are (false, false).
pub fn classify_section(title: &str, rules: &TaxonomyRules) -> SectionRelevance {
    classify_section_matched(title, rules).0
}

/// Like [`classify_section`], also reporting whether anything matched (used
/// for the unmatched-title warning list).
pub fn classify_section_matched(title: &str, rules: &TaxonomyRules) -> (SectionRelevance, bool) {
    let normalized = normalize_title(title);
    if let Some(relevance) = rules.overrides.get(&normalized) {
        return (*relevance, true);
    }
    for rule in &rules.rules {
        let pattern = rule.pattern.to_lowercase();
        let hit = match rule.match_kind {
            MatchKind::Substring => normalized.contains(&pattern),
            MatchKind::Title => normalized == pattern,
        };
        if hit {
            return (
                SectionRelevance {
                    contribution: rule.contribution,
                    soundness: rule.soundness,
                },
                true,
            );
        }
    }
    (SectionRelevance::default(), false)
}

/// Indices of the sections a paper-mode aspect should edit.
///
/// Contribution and soundness follow the relevance flags; presentation edits
/// are dispersed, so every body-bearing section is a target.
pub fn select_target_sections(
    paper: &PaperDocument,
    aspect: PaperAspect,
    rules: &TaxonomyRules,
) -> Result<Vec<usize>, TaxonomyError> {
    let indices: Vec<usize> = paper
        .sections
        .iter()
        .enumerate()
        .filter(|(_, section)| match aspect {
            PaperAspect::Contribution => classify_section(&section.title, rules).contribution,
            PaperAspect::Soundness => classify_section(&section.title, rules).soundness,
            PaperAspect::Presentation => !section.body_text().is_empty(),
        })
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(TaxonomyError::NoTargets { aspect });
    }
    Ok(indices)
}

/// Titles that match neither an override nor any keyword rule.
pub fn unmatched_titles(paper: &PaperDocument, rules: &TaxonomyRules) -> Vec<String> {
    paper
        .sections
        .iter()
        .filter(|s| !classify_section_matched(&s.title, rules).1)
        .map(|s| s.title.clone())
        .collect()
}
