//! Prompt templates and byte-exact placeholder substitution.
//!
//! Templates ship as data files under `prompts/` and are embedded verbatim.
//! A placeholder is the literal bracketed phrase ending in "here", e.g.
//! `[Paper Content here]`; bindings are keyed by the phrase without brackets.

use std::collections::BTreeMap;

use regex::Regex;

use super::RoleError;

pub const REVIEWER: &str = "reviewer";
pub const META_NONE: &str = "meta_none";
pub const META_DIMENSION: &str = "meta_dimension";
pub const META_TEMPLATE: &str = "meta_template";
pub const PERTURB_PAPER_CONTRIBUTION: &str = "perturb_paper_contribution";
pub const PERTURB_PAPER_SOUNDNESS: &str = "perturb_paper_soundness";
pub const PERTURB_PAPER_PRESENTATION: &str = "perturb_paper_presentation";
pub const PERTURB_REVIEW_TONE: &str = "perturb_review_tone";
pub const PERTURB_REVIEW_FACTUAL: &str = "perturb_review_factual";
pub const PERTURB_REBUTTAL_TONE: &str = "perturb_rebuttal_tone";
pub const PERTURB_REBUTTAL_PRESENTATION: &str = "perturb_rebuttal_presentation";
pub const PERTURB_REBUTTAL_COMPLETENESS: &str = "perturb_rebuttal_completeness";

pub const TEMPLATES: [(&str, &str); 12] = [
    (REVIEWER, include_str!("../../prompts/reviewer.txt")),
    (META_NONE, include_str!("../../prompts/meta_none.txt")),
    (
        META_DIMENSION,
        include_str!("../../prompts/meta_dimension.txt"),
    ),
    (
        META_TEMPLATE,
        include_str!("../../prompts/meta_template.txt"),
    ),
    (
        PERTURB_PAPER_CONTRIBUTION,
        include_str!("../../prompts/perturb_paper_contribution.txt"),
    ),
    (
        PERTURB_PAPER_SOUNDNESS,
        include_str!("../../prompts/perturb_paper_soundness.txt"),
    ),
    (
        PERTURB_PAPER_PRESENTATION,
        include_str!("../../prompts/perturb_paper_presentation.txt"),
    ),
    (
        PERTURB_REVIEW_TONE,
        include_str!("../../prompts/perturb_review_tone.txt"),
    ),
    (
        PERTURB_REVIEW_FACTUAL,
        include_str!("../../prompts/perturb_review_factual.txt"),
    ),
    (
        PERTURB_REBUTTAL_TONE,
        include_str!("../../prompts/perturb_rebuttal_tone.txt"),
    ),
    (
        PERTURB_REBUTTAL_PRESENTATION,
        include_str!("../../prompts/perturb_rebuttal_presentation.txt"),
    ),
    (
        PERTURB_REBUTTAL_COMPLETENESS,
        include_str!("../../prompts/perturb_rebuttal_completeness.txt"),
    ),
];

pub fn template_text(template_id: &str) -> Result<&'static str, RoleError> {
    TEMPLATES
        .iter()
        .find(|(id, _)| *id == template_id)
        .map(|(_, text)| *text)
        .ok_or_else(|| RoleError::UnknownTemplate(template_id.to_string()))
}

/// Byte-exact substitution of `[<name>]` placeholders.
pub fn render_prompt(
    template_id: &str,
    bindings: &BTreeMap<String, String>,
) -> Result<String, RoleError> {
    let mut text = template_text(template_id)?.to_string();
    for (name, value) in bindings {
        text = text.replace(&format!("[{name}]"), value);
    }
    let placeholder = Regex::new(r"\[[A-Za-z][A-Za-z0-9 &]* here\]").unwrap();
    if let Some(found) = placeholder.find(&text) {
        let name = found.as_str().trim_matches(['[', ']']).to_string();
        return Err(RoleError::UnboundPlaceholder {
            template: template_id.to_string(),
            name,
        });
    }
    Ok(text)
}
